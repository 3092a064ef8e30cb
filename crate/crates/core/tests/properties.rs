use proptest::prelude::*;

use meadsr::meadsr::select_routes;
use meadsr::metrics::compute_metrics;
use meadsr::model::{disjunction_ratio, RoutesTableEntry};
use meadsr::sim::trace::TraceRecord;
use meadsr::{Energy, EventTrace, NodeId, Route};

fn finals(consumed: &[f64]) -> EventTrace {
    let mut t = EventTrace::default();
    for (i, c) in consumed.iter().enumerate() {
        t.push(TraceRecord::Final { node: NodeId(i as u32), initial: 100.0, remaining: 100.0 - c });
    }
    t
}

fn route_strategy() -> impl Strategy<Value = Route> {
    proptest::sample::subsequence((1u32..10).collect::<Vec<_>>(), 0..5)
        .prop_shuffle()
        .prop_map(|mid| {
            let mut ids = vec![0];
            ids.extend(mid);
            ids.push(99);
            Route::from_ids(&ids).unwrap()
        })
}

fn table_strategy() -> impl Strategy<Value = Vec<RoutesTableEntry>> {
    proptest::collection::vec((route_strategy(), 1u32..100, 0u32..5), 1..8).prop_map(|v| {
        v.into_iter()
            .map(|(route, e, t)| RoutesTableEntry {
                src: NodeId(0),
                seq: 0,
                route,
                min_bat_lev: Energy::joules(e as f64),
                arrival_time: t as f64 * 0.01,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn sdcen_ignores_node_order(mut consumed in proptest::collection::vec(0.0f64..50.0, 1..20), seed in any::<u64>()) {
        let a = compute_metrics(&finals(&consumed), consumed.len() as u32).sdcen_j;
        let k = (seed as usize) % consumed.len();
        consumed.rotate_left(k);
        consumed.reverse();
        let b = compute_metrics(&finals(&consumed), consumed.len() as u32).sdcen_j;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn sdcen_zero_iff_equal(consumed in proptest::collection::vec(0u32..4, 2..10)) {
        let v: Vec<f64> = consumed.iter().map(|c| *c as f64).collect();
        let s = compute_metrics(&finals(&v), v.len() as u32).sdcen_j;
        let all_equal = v.windows(2).all(|w| w[0] == w[1]);
        prop_assert_eq!(s == 0.0, all_equal);
    }

    #[test]
    fn cep_times_delivered_is_total(consumed in proptest::collection::vec(0.0f64..50.0, 1..10), delivered in 1u32..50) {
        let mut t = finals(&consumed);
        for seq in 0..delivered {
            t.push(TraceRecord::Generate { t: 0.0, flow: 0, seq, src: NodeId(0), dest: NodeId(1) });
            t.push(TraceRecord::Deliver { t: 1.0, node: NodeId(1), flow: 0, seq, created: 0.0, hops: 1 });
        }
        let m = compute_metrics(&t, consumed.len() as u32);
        let back = m.cep_j.unwrap() * delivered as f64;
        prop_assert!((back - m.total_consumed_j).abs() <= 1e-12 * m.total_consumed_j.max(1.0));
    }

    #[test]
    fn selection_ignores_energy_scale(table in table_strategy(), k in 1u32..8) {
        let scaled: Vec<RoutesTableEntry> = table
            .iter()
            .cloned()
            .map(|mut e| { e.min_bat_lev = Energy::joules(e.min_bat_lev.as_joules() * (1u64 << k) as f64); e })
            .collect();
        prop_assert_eq!(select_routes(&table).unwrap(), select_routes(&scaled).unwrap());
    }

    #[test]
    fn selection_picks_from_the_table(table in table_strategy()) {
        let (primary, alternate) = select_routes(&table).unwrap();
        prop_assert!(table.iter().any(|e| e.route == primary));
        match alternate {
            Some(a) => {
                prop_assert!(a != primary || table.iter().filter(|e| e.route == primary).count() > 1);
                prop_assert!(table.len() > 1);
            }
            None => prop_assert_eq!(table.len(), 1),
        }
    }

    #[test]
    fn disjunction_in_unit_interval(p in route_strategy(), c in route_strategy()) {
        let d = disjunction_ratio(&p, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(disjunction_ratio(&c, &c).unwrap() == 0.0, !c.intermediates().is_empty());
    }
}
