use cellgamma::model::{
    catalog_lookup, catalog_names, validate_jump_data, validate_rankine_hugoniot,
    verify_entropy_relation, JumpData, ModelSpecs, ParamMap, ParamValue, SpaceTimeJumpData,
};
use proptest::prelude::*;

fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn models() -> Vec<ModelSpecs> {
    let mut out: Vec<ModelSpecs> = catalog_names()
        .iter()
        .map(|n| catalog_lookup(n, &ParamMap::new()).unwrap())
        .collect();
    let mut p = ParamMap::new();
    p.insert("space_dim".into(), ParamValue::Number(2.0));
    p.insert("psi".into(), ParamValue::Number(0.7));
    p.insert("psi_axis".into(), ParamValue::Number(1.0));
    out.push(catalog_lookup("double_well", &p).unwrap());
    let mut p = ParamMap::new();
    p.insert("space_dim".into(), ParamValue::Number(2.0));
    p.insert("direction".into(), ParamValue::List(vec![0.6, 0.8]));
    out.push(catalog_lookup("burgers", &p).unwrap());
    out
}

fn check_derivatives(specs: &ModelSpecs, s: &[f64], jet: &[f64]) {
    let m = specs.state_dim();
    let mut g = vec![0.0; m];
    specs.potential.gradient(s, &mut g);
    let mut x = s.to_vec();
    for i in 0..m {
        let h = step(s[i]);
        x[i] = s[i] + h;
        let fp = specs.potential.value(&x);
        x[i] = s[i] - h;
        let fm = specs.potential.value(&x);
        x[i] = s[i];
        assert!(
            rel_err(g[i], (fp - fm) / (2.0 * h)) <= 1e-6,
            "{} dW/ds{i}",
            specs.name
        );
    }

    let (l, n) = (specs.flux.rows(), specs.flux.space_dim());
    let mut jac = vec![0.0; l * n * m];
    specs.flux.jacobian(s, &mut jac);
    let (mut vp, mut vm) = (vec![0.0; l * n], vec![0.0; l * n]);
    for i in 0..m {
        let h = step(s[i]);
        x[i] = s[i] + h;
        specs.flux.value(&x, &mut vp);
        x[i] = s[i] - h;
        specs.flux.value(&x, &mut vm);
        x[i] = s[i];
        for e in 0..l * n {
            assert!(
                rel_err(jac[e * m + i], (vp[e] - vm[e]) / (2.0 * h)) <= 1e-6,
                "{} dPsi",
                specs.name
            );
        }
    }

    let mut gg = vec![0.0; jet.len()];
    specs.gradient.gradient(jet, &mut gg);
    let mut y = jet.to_vec();
    for i in 0..jet.len() {
        let h = step(jet[i]);
        y[i] = jet[i] + h;
        let fp = specs.gradient.value(&y);
        y[i] = jet[i] - h;
        let fm = specs.gradient.value(&y);
        y[i] = jet[i];
        assert!(
            rel_err(gg[i], (fp - fm) / (2.0 * h)) <= 1e-6,
            "{} dG",
            specs.name
        );
    }

    if let Some(law) = &specs.conservation {
        let k = law.entropy.state_dim();
        let mut eg = vec![0.0; k];
        let mut eh = vec![0.0; k * k];
        law.entropy.grad(s, &mut eg);
        law.entropy.hess(s, &mut eh);
        let (mut gp, mut gm) = (vec![0.0; k], vec![0.0; k]);
        for i in 0..k {
            let h = step(s[i]);
            x[i] = s[i] + h;
            let ep = law.entropy.eta(&x);
            law.entropy.grad(&x, &mut gp);
            x[i] = s[i] - h;
            let em = law.entropy.eta(&x);
            law.entropy.grad(&x, &mut gm);
            x[i] = s[i];
            assert!(rel_err(eg[i], (ep - em) / (2.0 * h)) <= 1e-6);
            for r in 0..k {
                assert!(rel_err(eh[r * k + i], (gp[r] - gm[r]) / (2.0 * h)) <= 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evaluator_derivatives_match_central_differences(
        raw in prop::collection::vec(-2.0f64..2.0, 3),
        jet_raw in prop::collection::vec(-3.0f64..3.0, 9),
    ) {
        for specs in models() {
            let m = specs.state_dim();
            let s = &raw[..m];
            let jet = &jet_raw[..m * specs.gradient.space_dim()];
            check_derivatives(&specs, s, jet);
        }
    }

    #[test]
    fn anisotropy_vanishes_exactly_on_the_easy_plane(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..6.3) {
        let specs = catalog_lookup("micromagnetics_2d", &ParamMap::new()).unwrap();
        let m = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let w = specs.potential.value(&m);
        prop_assert!(w >= 0.0);
        prop_assert!((w == 0.0) == (m[2] == 0.0));
        let flat = [phi.cos(), phi.sin(), 0.0];
        prop_assert_eq!(specs.potential.value(&flat), 0.0);
    }

    #[test]
    fn validation_is_symmetric_under_flip(
        a in prop::collection::vec(-1.0f64..1.0, 3),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        angle in 0.0f64..6.3,
    ) {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm(&a) > 0.1 && norm(&b) > 0.1);
        let pa: Vec<f64> = a.iter().map(|x| x / norm(&a)).collect();
        let pb: Vec<f64> = b.iter().map(|x| x / norm(&b)).collect();
        prop_assume!(pa != pb);
        let specs = catalog_lookup("micromagnetics_2d", &ParamMap::new()).unwrap();
        let jump = JumpData::new(pa, pb, vec![angle.cos(), angle.sin()]).unwrap();
        let r1 = validate_jump_data(&jump, &specs, 1e-8);
        let r2 = validate_jump_data(&jump.flipped(), &specs, 1e-8);
        prop_assert_eq!(r1.pass, r2.pass);
        for c in &r1.checks {
            let other = match c.name.as_str() {
                "W(phi_plus)" => "W(phi_minus)",
                "W(phi_minus)" => "W(phi_plus)",
                "constraint(phi_plus)" => "constraint(phi_minus)",
                "constraint(phi_minus)" => "constraint(phi_plus)",
                n => n,
            };
            let d = r2.get(other).unwrap();
            prop_assert!((c.value.abs() - d.value.abs()).abs() <= 1e-14);
        }
    }

    #[test]
    fn entropy_relation_holds_across_catalog(u in prop::collection::vec(-3.0f64..3.0, 2)) {
        for specs in models() {
            if let Some(law) = &specs.conservation {
                let k = law.entropy.state_dim();
                let c = verify_entropy_relation(law, &[u[..k].to_vec()], 1e-6);
                prop_assert!(c.pass, "{} {:?}", specs.name, c);
            }
        }
    }
}

#[test]
fn catalog_entries_have_documented_shapes() {
    let dw = catalog_lookup("double_well", &ParamMap::new()).unwrap();
    assert_eq!((dw.state_dim(), dw.space_dim()), (1, 1));
    assert!(dw.flux.is_zero());
    for s in [-1.0, 1.0] {
        assert_eq!(dw.potential.value(&[s]), 0.0);
    }
    assert_eq!(dw.potential.value(&[0.0]), 1.0);
    assert!(dw.gradient.homogeneous_quadratic());

    let mm = catalog_lookup("micromagnetics_2d", &ParamMap::new()).unwrap();
    assert_eq!((mm.state_dim(), mm.space_dim(), mm.flux_rows()), (3, 2, 1));
    let mut psi = [0.0; 2];
    mm.flux.value(&[0.3, -0.4, 0.866], &mut psi);
    assert_eq!(psi, [0.3, -0.4]);

    let b = catalog_lookup("burgers", &ParamMap::new()).unwrap();
    let law = b.conservation.unwrap();
    let mut f = [0.0];
    law.flux.value(&[3.0], &mut f);
    assert_eq!(f[0], 4.5);
    assert_eq!(law.entropy.eta(&[3.0]), 4.5);
}

#[test]
fn jump_validation_examples() {
    let mm = catalog_lookup("micromagnetics_2d", &ParamMap::new()).unwrap();
    let bloch = JumpData::new(vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0], vec![1.0, 0.0]).unwrap();
    assert!(validate_jump_data(&bloch, &mm, 1e-12).pass);
    let charged = JumpData::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0]).unwrap();
    let r = validate_jump_data(&charged, &mm, 1e-12);
    assert!(!r.pass);
    assert!((r.get("normal_flux_mismatch").unwrap().value - 1.0).abs() < 1e-15);

    let b = catalog_lookup("burgers", &ParamMap::new()).unwrap();
    let law = b.conservation.as_ref().unwrap();
    let s = 0.5f64.sqrt();
    let tilted = SpaceTimeJumpData::new(vec![0.0], vec![2.0], vec![s, -s]).unwrap();
    assert!(validate_rankine_hugoniot(&tilted, law.flux.as_ref(), 1e-12).pass);
    let bad = SpaceTimeJumpData::new(vec![0.0], vec![1.0], vec![1.0, 0.0]).unwrap();
    let r = validate_rankine_hugoniot(&bad, law.flux.as_ref(), 1e-12);
    assert!(!r.pass);
    assert!((r.checks[0].value.abs() - 0.5).abs() < 1e-15);
}
