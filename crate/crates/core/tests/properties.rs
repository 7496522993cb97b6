use proptest::prelude::*;

use tauberian::bridge::{default_s_max, full_gap, kernel_gap};
use tauberian::control::{counterexample, simulate, ControlSchedule};
use tauberian::discrete::{
    fixed_point_residual, min_mean_cycle, min_mean_cycle_all, value_lambda, value_n, value_n_grid, DiscreteProblem,
};
use tauberian::kernel::{mass, KernelMass};
use tauberian::means::{abel_mean, cesaro_mean, BoundedSequence};
use tauberian::plays::{concatenate, gamma_lambda, gamma_t, payoff_curve, Trajectory};

fn graph() -> impl Strategy<Value = DiscreteProblem> {
    (1usize..16, 1usize..4, any::<u64>()).prop_map(|(n, k, seed)| DiscreteProblem::random(n, k, seed).unwrap())
}

fn schedule() -> impl Strategy<Value = ControlSchedule> {
    prop::collection::vec((0.001f64..3.0, 0.0f64..=1.0), 1..6).prop_map(|pieces| {
        let mut t = 0.0;
        let mut switches = Vec::new();
        let mut values = vec![pieces[0].1];
        for (dt, u) in &pieces[1..] {
            t += dt;
            switches.push(t);
            values.push(*u);
        }
        ControlSchedule::new(switches, values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn means_of_bounded_sequences_stay_in_bounds(values in prop::collection::vec(0.0f64..=1.0, 1..50), n in 1usize..400, lambda in 0.01f64..1.0) {
        let seq = BoundedSequence::periodic(values).unwrap();
        let c = cesaro_mean(&seq, n).unwrap();
        let a = abel_mean(&seq, lambda, 1e-12).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn kernel_mass_is_additive_and_scale_free(lambda in 0.01f64..5.0, a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0) {
        let mut v = [a / lambda, b / lambda, c / lambda];
        v.sort_by(f64::total_cmp);
        let k = KernelMass::new(lambda).unwrap();
        let unit = KernelMass::new(1.0).unwrap();
        let whole = mass(&k, v[0], v[2]).unwrap();
        prop_assert!((whole - mass(&k, v[0], v[1]).unwrap() - mass(&k, v[1], v[2]).unwrap()).abs() < 1e-12);
        prop_assert!((whole - mass(&unit, lambda * v[0], lambda * v[2]).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&whole));
    }

    #[test]
    fn averages_of_concatenations_are_weighted(head in prop::collection::vec(0.0f64..=1.0, 2..60), tail in prop::collection::vec(0.0f64..=1.0, 2..60)) {
        let h = 0.5;
        let x = Trajectory::from_costs(head.clone(), h).unwrap();
        let mut tail = tail;
        tail[0] = *head.last().unwrap();
        let y = Trajectory::from_costs(tail, h).unwrap();
        let s = x.horizon();
        let t = y.horizon();
        let z = concatenate(&x, s, &y).unwrap();
        let lhs = gamma_t(&z, s + t).unwrap();
        let rhs = s / (s + t) * gamma_t(&x, s).unwrap() + t / (s + t) * gamma_t(&y, t).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn running_averages_move_slowly(costs in prop::collection::vec(0.0f64..=1.0, 3..200)) {
        let x = Trajectory::from_costs(costs, 0.1).unwrap();
        prop_assert!(payoff_curve(&x).unwrap().lipschitz_excess() <= 1e-12);
    }

    #[test]
    fn speed_never_decreases(sched in schedule(), x0 in 0.0f64..3.0, y0 in 0.0f64..1.0) {
        let p = counterexample();
        let tr = simulate(&p, [x0, y0], &sched, 12.0, 0.05).unwrap();
        prop_assert!(tr.states().windows(2).all(|w| w[1][1] >= w[0][1] - 1e-12));
        let g = gamma_lambda(&tr, 2.0, 1e-9).unwrap();
        prop_assert!(g.lower() >= -1e-12 && g.upper() <= 1.0 + 1e-12);
    }

    #[test]
    fn canonical_schedules_are_stable(sched in schedule()) {
        let c = sched.canonical();
        prop_assert_eq!(c.canonical(), c.clone());
        for t in [0.0, 0.5, 1.7, 4.0, 20.0] {
            prop_assert_eq!(c.value_at(t), sched.value_at(t));
        }
    }

    #[test]
    fn finite_horizon_values_satisfy_the_recursion(p in graph()) {
        let grid: Vec<usize> = (1..=60).collect();
        let tables = value_n_grid(&p, &grid).unwrap();
        let (lo, hi) = p.costs().iter().fold((1.0f64, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
        for n in 2..=60 {
            let (cur, prev) = (&tables[n - 1], &tables[n - 2]);
            for z in 0..p.len() {
                let y = cur.witness[z];
                let rhs = p.costs()[z] + (n - 1) as f64 * prev.values[y];
                prop_assert!((n as f64 * cur.values[z] - rhs).abs() < 1e-9);
                prop_assert!(cur.values[z] >= lo - 1e-12 && cur.values[z] <= hi + 1e-12);
            }
        }
        prop_assert_eq!(&value_n(&p, 37).unwrap(), &tables[36]);
    }

    #[test]
    fn discounted_values_are_fixed_points(p in graph(), lambda in 0.001f64..0.999) {
        let v = value_lambda(&p, lambda, 1e-10).unwrap();
        prop_assert!(fixed_point_residual(&p, &v.values, lambda) <= 1e-10);
        let (lo, hi) = p.costs().iter().fold((1.0f64, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
        for z in 0..p.len() {
            let g = p.costs()[z];
            prop_assert!(v.values[z] >= lambda * g - 1e-12 && v.values[z] <= lambda * g + (1.0 - lambda) + 1e-12);
            prop_assert!(v.values[z] >= lo - 1e-10 && v.values[z] <= hi + 1e-10);
        }
    }

    #[test]
    fn cycle_limits_agree_and_bound_the_values(p in graph()) {
        let all = min_mean_cycle_all(&p);
        let n = 2000;
        let vn = value_n(&p, n).unwrap();
        for z in 0..p.len() {
            prop_assert!((all[z] - min_mean_cycle(&p, z)).abs() < 1e-12);
            prop_assert!((vn.values[z] - all[z]).abs() * n as f64 <= 2.0 * p.len() as f64);
        }
    }

    #[test]
    fn graph_text_round_trips(p in graph()) {
        prop_assert_eq!(DiscreteProblem::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn kernel_gap_respects_its_bound(lambda in 0.002f64..0.99) {
        let s = default_s_max(lambda);
        let g = kernel_gap(lambda, s).unwrap();
        prop_assert!(g.pass && g.e_value >= 0.0);
        prop_assert!((full_gap(lambda, s).unwrap() - 2.0 * g.e_value).abs() < 1e-9);
        let k = s as usize;
        let discrete_mass = lambda * (0..k).map(|i| (1.0 - lambda).powi(i as i32)).sum::<f64>();
        prop_assert!((discrete_mass - 1.0).abs() < 1e-9);
    }
}
