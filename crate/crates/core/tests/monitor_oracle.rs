//! The monitor against a direct evaluator that enumerates every window sample.

use modescout::benchmarks::SimTrace;
use modescout::monitor::{at_suite, bitvector_mode_sequence, evaluate, monitor, parse_formula, Formula, TIME_EPS};
use proptest::prelude::*;

/// Truth of `f` at sample `i`, scanning all samples for each window.
fn naive(f: &Formula, tr: &SimTrace, i: usize) -> bool {
    let t = tr.times()[i];
    match f {
        Formula::Less { signal, threshold } => tr.state(i)[tr.signal_index(signal).unwrap()] < *threshold,
        Formula::TokenEq { value, .. } => &tr.discrete()[i] == value,
        Formula::Not(x) => !naive(x, tr, i),
        Formula::And(l, r) => naive(l, tr, i) && naive(r, tr, i),
        Formula::Implies(l, r) => !naive(l, tr, i) || naive(r, tr, i),
        Formula::Always { a, b, body } => (0..tr.len())
            .filter(|&j| tr.times()[j] >= t + a - TIME_EPS && tr.times()[j] <= t + b + TIME_EPS)
            .all(|j| naive(body, tr, j)),
        Formula::Eventually { a, b, body } => (0..tr.len())
            .filter(|&j| tr.times()[j] >= t + a - TIME_EPS && tr.times()[j] <= t + b + TIME_EPS)
            .any(|j| naive(body, tr, j)),
    }
}

fn traces() -> impl Strategy<Value = SimTrace> {
    prop::collection::vec((0.01..0.6f64, -1.0..1.0f64, -1.0..1.0f64, 0u8..3), 1..40).prop_map(|rows| {
        let mut tr = SimTrace::new(vec!["x".into(), "y".into()], "mode");
        let mut t = 0.0;
        for (dt, x, y, m) in rows {
            tr.push(t, vec![x, y], ["a", "b", "c"][m as usize]).unwrap();
            t += dt;
        }
        tr
    })
}

fn formulas() -> impl Strategy<Value = Formula> {
    let atom = prop_oneof![
        (prop_oneof![Just("x"), Just("y")], -1.0..1.0f64).prop_map(|(s, c)| Formula::less(s, c)),
        prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(|v| Formula::token_eq("mode", v)),
    ];
    atom.prop_recursive(4, 24, 2, |inner| {
        let interval = (0.0..2.0f64, 0.0..3.0f64).prop_map(|(a, w)| (a, a + w));
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| l.and(r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| l.implies(r)),
            (interval.clone(), inner.clone()).prop_map(|((a, b), f)| Formula::always(a, b, f)),
            (interval, inner).prop_map(|((a, b), f)| Formula::eventually(a, b, f)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_window_enumeration(f in formulas(), tr in traces()) {
        let fast = evaluate(&f, &tr).unwrap();
        for i in 0..tr.len() {
            prop_assert_eq!(fast[i], naive(&f, &tr, i), "sample {} of {}", i, f);
        }
    }

    #[test]
    fn always_eventually_duality(f in formulas(), tr in traces(), a in 0.0..2.0f64, w in 0.0..3.0f64) {
        let lhs = Formula::always(a, a + w, f.clone()).not();
        let rhs = Formula::eventually(a, a + w, f.not());
        prop_assert_eq!(monitor(&lhs, &tr).unwrap(), monitor(&rhs, &tr).unwrap());
    }

    #[test]
    fn display_parses_back(f in formulas(), tr in traces()) {
        let back = parse_formula(&f.to_string()).unwrap();
        prop_assert_eq!(evaluate(&back, &tr).unwrap(), evaluate(&f, &tr).unwrap());
    }
}

/// AT-style trace sampled every millisecond.
fn at_trace(end: f64, v: impl Fn(f64) -> f64, omega: impl Fn(f64) -> f64, gear: impl Fn(f64) -> u8) -> SimTrace {
    let mut tr = SimTrace::new(vec!["v".into(), "omega".into()], "gear");
    let n = (end * 1000.0).round() as usize;
    for k in 0..=n {
        let t = k as f64 / 1000.0;
        tr.push(t, vec![v(t), omega(t)], gear(t).to_string()).unwrap();
    }
    tr
}

fn at_traces() -> impl Strategy<Value = SimTrace> {
    (30.0..140.0f64, 0.0..60.0f64, 1000.0..5000.0f64, 0.0..2000.0f64, 1u8..=4, 0.0..35.0f64).prop_map(
        |(v0, dv, w0, dw, g, switch)| {
            at_trace(
                36.0,
                move |t| v0 + dv * (t / 5.0).sin(),
                move |t| w0 + dw * (t / 3.0).cos(),
                move |t| if t < switch { g } else { g % 4 + 1 },
            )
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn speed_bits_are_monotone(tr in at_traces()) {
        let bits = bitvector_mode_sequence(&tr, &at_suite()).unwrap().0;
        for k in 0..3 {
            prop_assert!(!bits[k] || bits[k + 1]);
        }
        prop_assert!(!bits[4] || bits[5]);
        prop_assert!(!bits[5] || bits[6]);
        prop_assert!(!bits[7] || bits[8]);
    }

    #[test]
    fn bits_ignore_samples_past_the_horizon(tr in at_traces(), tail_v in 0.0..500.0f64) {
        let suite = at_suite();
        let horizon = suite.iter().map(Formula::horizon).fold(0.0, f64::max);
        let cut = tr.truncated(horizon + 0.05);
        let mut altered = cut.clone();
        let last = altered.end_time().unwrap();
        altered.push(last + 1.0, vec![tail_v, 9000.0], "3").unwrap();
        let bits = bitvector_mode_sequence(&tr, &suite).unwrap();
        prop_assert_eq!(&bitvector_mode_sequence(&cut, &suite).unwrap(), &bits);
        prop_assert_eq!(&bitvector_mode_sequence(&altered, &suite).unwrap(), &bits);
    }
}

#[test]
fn speed_examples() {
    let f = Formula::always(0.0, 10.0, Formula::less("v", 80.0));
    let calm = at_trace(30.0, |_| 50.0, |_| 1000.0, |_| 1);
    assert!(monitor(&f, &calm).unwrap());
    let spike = at_trace(30.0, |t| if (t - 5.0).abs() < 1e-9 { 90.0 } else { 50.0 }, |_| 1000.0, |_| 1);
    assert!(!monitor(&f, &spike).unwrap());
}

#[test]
fn gear_stability_examples() {
    let g1 = || Formula::token_eq("gear", "1");
    let body = g1().not().and(Formula::next(g1())).implies(Formula::next(Formula::always(0.0, 1.0, g1())));
    let formula = Formula::always(0.0, 30.0, body.clone());
    let held = at_trace(30.0, |_| 50.0, |_| 1000.0, |t| if t < 10.0 { 2 } else if t < 11.1 { 1 } else { 2 });
    assert!(monitor(&formula, &held).unwrap());
    let brief = at_trace(30.0, |_| 50.0, |_| 1000.0, |t| if t < 10.0 { 2 } else if t < 10.5 { 1 } else { 2 });
    assert!(!monitor(&formula, &brief).unwrap());
    for tr in [&held, &brief] {
        let fast = evaluate(&body, tr).unwrap();
        for i in (9800..10200).step_by(7) {
            assert_eq!(fast[i], naive(&body, tr, i), "sample {i}");
        }
    }
}

#[test]
fn suite_examples() {
    let nominal = at_trace(30.0, |_| 50.0, |_| 1000.0, |_| 1);
    let bits = bitvector_mode_sequence(&nominal, &at_suite()).unwrap();
    assert_eq!(bits.to_string(), "1111111111111");
    assert_eq!(bits.to_mode_sequence().len(), 13);

    let spiky = at_trace(30.0, |_| 50.0, |t| if (3.0..4.0).contains(&t) { 4650.0 } else { 1000.0 }, |_| 1);
    let bits = bitvector_mode_sequence(&spiky, &at_suite()).unwrap().0;
    assert_eq!(&bits[4..7], &[false, false, true]);
}
