use std::f64::consts::TAU;
use std::sync::Mutex;

use proptest::prelude::*;
use twomat::search::{
    angular_search, assemble_curve, evaluate_point, midpoint_search, radial_search,
    AngularSchedule, Counting, CouplingPoint, Dummy, Evaluation, Evaluator, RadialOptions,
    StepPolicy,
};

/// Records every point it is asked about.
struct Recording<E> {
    inner: E,
    seen: Mutex<Vec<(f64, f64)>>,
}

impl<E: Evaluator> Evaluator for Recording<E> {
    fn evaluate(&self, g: f64, h: f64) -> Result<Evaluation, twomat::error::SearchError> {
        self.seen.lock().unwrap().push((g, h));
        self.inner.evaluate(g, h)
    }
}

fn region() -> impl Strategy<Value = Dummy> {
    prop_oneof![
        (0.05f64..1.0).prop_map(|radius| Dummy::Disk { radius }),
        (0.05f64..1.0, 0.05f64..1.0).prop_map(|(a, b)| Dummy::Ellipse { a, b }),
    ]
}

/// Boundary radius of a star-shaped dummy along angle `phi`.
fn boundary(d: &Dummy, phi: f64) -> f64 {
    match *d {
        Dummy::Disk { radius } => radius,
        Dummy::Ellipse { a, b } => 1.0 / ((phi.cos() / a).powi(2) + (phi.sin() / b).powi(2)).sqrt(),
        Dummy::HalfPlane { .. } => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bisection_bound(d in region(), phi in 0.0f64..TAU, far in 1.05f64..3.0, delta in 1e-4f64..0.05) {
        let e = Counting::new(d);
        let r = far * boundary(&d, phi);
        let green = evaluate_point(&e, 0.0, 0.0).unwrap();
        let red = evaluate_point(&e, r * phi.cos(), r * phi.sin()).unwrap();
        let before = e.count();
        let dip = midpoint_search(green, red, delta, &e).unwrap();
        let used = e.count() - before;
        prop_assert!(used <= (r / delta).log2().ceil().max(0.0) as usize + 1);
        prop_assert!(dip.is_consistent());
        prop_assert!((dip.midpoint_radius() - boundary(&d, phi)).abs() <= delta);
    }

    #[test]
    fn radial_points_stay_on_the_ray(d in region(), phi in 0.0f64..TAU, far in 1.05f64..2.0, base in 0.002f64..0.02) {
        let e = Recording { inner: d, seen: Mutex::new(Vec::new()) };
        let r = far * boundary(&d, phi);
        let (g0, h0) = (r * phi.cos(), r * phi.sin());
        let opts = RadialOptions { policy: StepPolicy::Adaptive { base }, max_steps: 10_000 };
        let dip = radial_search(CouplingPoint::untested(g0, h0), &opts, &e).unwrap();
        let (ug, uh) = (g0 / r, h0 / r);
        for &(g, h) in e.seen.lock().unwrap().iter() {
            prop_assert!((g * uh - h * ug).abs() < 1e-12);
        }
        prop_assert!(dip.is_consistent());
        prop_assert!((dip.midpoint_radius() - boundary(&d, phi)).abs() <= base);
    }

    #[test]
    fn angular_dipoles_keep_the_radius(d in region(), phi in 0.0f64..TAU, scale in 0.2f64..0.95) {
        // A radius the ellipse boundary crosses; negated when starting inside.
        let (a, b) = match d { Dummy::Disk { radius } => (radius, radius), Dummy::Ellipse { a, b } => (a, b), _ => unreachable!() };
        prop_assume!((a - b).abs() > 0.05);
        let r = a.min(b) + scale * (a.max(b) - a.min(b));
        let start = CouplingPoint::untested(r * phi.cos(), r * phi.sin());
        let inside = d.contains(start.g, start.h);
        let dip = angular_search(start, &AngularSchedule::default(), inside, &d).unwrap();
        prop_assert!((dip.green.radius() - dip.red.radius()).abs() < 1e-12);
        prop_assert!(dip.is_consistent());
    }

    #[test]
    fn assembled_curve_tracks_the_boundary(d in region(), rays in prop::collection::vec(0.0f64..1.57, 1..6)) {
        let opts = RadialOptions::default();
        let delta = 0.0015;
        let dipoles: Vec<_> = rays
            .iter()
            .map(|&phi| {
                let r = 1.2 * boundary(&d, phi);
                radial_search(CouplingPoint::untested(r * phi.cos(), r * phi.sin()), &opts, &d).unwrap()
            })
            .collect();
        let curve = assemble_curve(dipoles);
        for ray in &curve.rays {
            for r in &ray.radii {
                prop_assert!((r - boundary(&d, ray.phi)).abs() <= delta);
            }
        }
    }
}
