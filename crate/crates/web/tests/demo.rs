use segq::power::{brute_force_search, ConstraintMode};
use segq::Scenario;
use segq_web::{departure_curves, distributions, tradeoff_curve, Inputs};

fn reference(constant: bool) -> Inputs {
    Inputs { arrival_rate: 150.0, capacity: 50, thresholds: vec![15, 30], rates: vec![200.0, 300.0, 400.0], constant }
}

#[test]
fn distributions_are_probability_vectors() {
    let d = distributions(&reference(false)).unwrap();
    assert_eq!(d.post_departure.len(), 51);
    assert!((d.post_departure.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((d.arbitrary_epoch.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((d.region_masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((d.t_mean * 150.0 - 1.0).abs() < 1e-3);
}

#[test]
fn departure_curves_carry_unit_mass() {
    let c = departure_curves(&reference(true), 400).unwrap();
    let atoms: f64 = c.atoms.iter().map(|a| a.1).sum();
    assert!((atoms + c.p0 - 1.0).abs() < 1e-9);
    assert!((c.laplace[0].1 - 1.0).abs() < 1e-9);
    assert!(c.laplace.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(c.density.iter().all(|p| p.1 >= 0.0));
}

#[test]
fn tradeoff_envelope_matches_brute_force_optimum() {
    let curve = tradeoff_curve(&reference(false), true, 600.0).unwrap();
    assert!(curve.windows(2).all(|w| w[1].delay >= w[0].delay && w[1].np < w[0].np));
    for bound in [0.024, 0.025, 0.0275] {
        let ctx = Scenario::reference().design_context(bound, ConstraintMode::System);
        let best = brute_force_search(&ctx).best.unwrap();
        let cheapest = curve.iter().rfind(|p| p.delay <= bound).unwrap();
        assert!((cheapest.np - best.np.unwrap()).abs() < 1e-12, "bound {bound}");
    }
}

#[test]
fn bad_inputs_are_reported() {
    let mut i = reference(false);
    i.rates.pop();
    assert!(distributions(&i).unwrap_err().contains("regions"));
    let mut i = reference(false);
    i.thresholds = vec![30, 15];
    assert!(distributions(&i).is_err());
    assert!(tradeoff_curve(&Inputs { rates: vec![200.0], ..reference(false) }, true, 600.0).is_err());
}
