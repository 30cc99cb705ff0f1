//! Integration checks that compose the library the way a consumer would:
//! pick a problem, derive parameters, march the scheme, and audit the run
//! through the diagnostics API.

use ac_core::baselines::{self, fex_window_satisfied};
use ac_core::diagnostics::{check_energy_monotone, discrete_energy, error_norms, EnergyRecord};
use ac_core::grid::{BoundaryCondition, GridSpec, ScalarField};
use ac_core::kinetic::{kinetic_step, moment_phi, DistributionField, LatticeModel};
use ac_core::problems::{self, Problem};
use ac_core::scheme;

/// March the traveling wave with validated parameters and audit the run:
/// the profile must track the closed form, stay inside the unit bound, and
/// dissipate the discrete energy at every recorded step.
#[test]
fn traveling_wave_marched_and_audited_end_to_end() {
    let eps = (0.9f64).tanh() / (16.0 * 2.0f64.sqrt());
    let problem = Problem::TravelingWave { eps_interface: eps };
    let spec = problem.grid(192).unwrap();
    let dt = 0.05;
    let params = scheme::derive_params(1, scheme::default_omega1(1), eps, spec.dx(), dt).unwrap();

    let mut phi = problem.initial_field(&spec).unwrap();
    let mut records = vec![EnergyRecord {
        t: 0.0,
        energy: discrete_energy(&phi, &params),
        max_abs: phi.max_abs(),
    }];
    let steps = 100;
    for k in 1..=steps {
        let (next, report) = scheme::step(&phi, &params).unwrap();
        phi = next;
        assert!(report.max_abs <= 1.0 + 1e-13, "step {k}: left the unit bound");
        records.push(EnergyRecord {
            t: k as f64 * dt,
            energy: discrete_energy(&phi, &params),
            max_abs: report.max_abs,
        });
    }

    let t = steps as f64 * dt;
    let exact = ScalarField::from_fn(spec, |x| problems::traveling_wave_exact(x[0], t, eps));
    let (err_inf, _) = error_norms(&phi, &exact).unwrap();
    assert!(
        err_inf > 0.0 && err_inf < 2e-2,
        "profile drifted from the closed form: err_inf = {err_inf:.3e}"
    );

    let verdict = check_energy_monotone(&records, None);
    assert!(verdict.pass, "energy rose by {:.3e}", verdict.max_increase);
    assert!(records.last().unwrap().energy < records[0].energy);
}

/// The kinetic representation, started at equilibrium, must reproduce the
/// macroscopic trajectory through its zeroth moment.
#[test]
fn kinetic_distributions_recover_the_macroscopic_march() {
    let spec = GridSpec::new(2, 24, 2.0, [0.0; 3], BoundaryCondition::Periodic).unwrap();
    let params = scheme::derive_params(2, scheme::default_omega1(2), 0.05, spec.dx(), 0.4).unwrap();
    let phi0 = ScalarField::from_fn(spec, |x| {
        0.8 * (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).cos()
    });

    let model = LatticeModel::from_params(&params);
    let mut dist = DistributionField::at_equilibrium(&phi0, &model);
    // the moment of the equilibrium distribution is the field itself
    let (roundtrip, _) = error_norms(&moment_phi(&dist), &phi0).unwrap();
    assert!(roundtrip <= 1e-14, "equilibrium roundtrip off by {roundtrip:.3e}");

    let mut phi = phi0;
    for step in 1..=10 {
        dist = kinetic_step(&dist, &params, &model).unwrap();
        phi = scheme::step(&phi, &params).unwrap().0;
        let (gap, _) = error_norms(&moment_phi(&dist), &phi).unwrap();
        assert!(gap <= 1e-11, "step {step}: moment drifted {gap:.3e}");
    }
}

/// The monotonicity audit must accept a genuine dissipative series and
/// point at the first tampered record.
#[test]
fn energy_audit_flags_a_tampered_record() {
    let problem = Problem::RandomHd { seed: 11 };
    let spec = problem.grid(64).unwrap();
    let params = scheme::params_from_eps_ratio(1, 0.25, 0.1, spec.dx(), 0.5).unwrap();
    let mut phi = problem.initial_field(&spec).unwrap();
    let mut records = Vec::new();
    for k in 0..=40 {
        if k > 0 {
            phi = scheme::step(&phi, &params).unwrap().0;
        }
        records.push(EnergyRecord {
            t: k as f64 * params.dt,
            energy: discrete_energy(&phi, &params),
            max_abs: phi.max_abs(),
        });
    }
    assert!(check_energy_monotone(&records, None).pass);

    records[25].energy = records[24].energy + 1e-6;
    let verdict = check_energy_monotone(&records, None);
    assert!(!verdict.pass);
    assert_eq!(verdict.first_violation, Some(24));
    assert!(verdict.max_increase >= 1e-6);
}

/// One step of each scheme from the same smooth state: the baselines are
/// consistent discretizations of the same flow, so single-step gaps shrink
/// at second order in the time step.
#[test]
fn baselines_agree_with_the_closed_form_scheme_for_one_small_step() {
    let eps = 0.01;
    let spec = GridSpec::new(1, 128, 1.0, [0.0; 3], BoundaryCondition::HomogeneousNeumann).unwrap();
    let phi = ScalarField::from_fn(spec, |x| 0.9 * (2.0 * std::f64::consts::PI * x[0]).cos());

    let mut gaps = Vec::new();
    for dt in [0.02, 0.01] {
        let params = scheme::derive_params(1, scheme::default_omega1(1), eps, spec.dx(), dt).unwrap();
        assert!(fex_window_satisfied(&params), "tame parameters");
        let rlb = scheme::step(&phi, &params).unwrap().0;
        let fex = baselines::fex_fd_step(&phi, &params).unwrap();
        let (cn, report) = baselines::cn_step(&phi, &params, 1e-14, 50).unwrap();
        assert!(
            report.final_residual <= 1e-13,
            "Newton residual {:.3e} on a smooth state",
            report.final_residual
        );
        let (gap_fex, _) = error_norms(&rlb, &fex).unwrap();
        let (gap_cn, _) = error_norms(&rlb, &cn).unwrap();
        gaps.push(gap_fex.max(gap_cn));
    }
    assert!(gaps[0] < 1e-3, "one-step gap too large: {:.3e}", gaps[0]);
    // halving dt should cut the one-step gap by roughly four
    let ratio = gaps[0] / gaps[1];
    assert!(
        (2.5..6.0).contains(&ratio),
        "gap ratio {ratio:.2} not consistent with second-order one-step agreement \
         (gaps {:.3e} / {:.3e})",
        gaps[0],
        gaps[1]
    );
}

/// Outside the validity window the unit bound is forfeit for everyone (the
/// bound genuinely needs the window), but the failure modes differ: the
/// implicit half-step always has a real root, so the closed-form orbit
/// saturates at a finite plateau, while the explicit update reaches
/// non-finite values within a few dozen steps.
#[test]
fn closed_form_stays_finite_where_the_explicit_update_diverges() {
    // stencil weight ~0.82: far outside both stability windows
    let eps = 4.0 * (0.9f64).tanh() / (32.0 * 2.0f64.sqrt());
    let params = scheme::derive_params_unchecked(1, 1.0 / 3.0, eps, 1.0 / 32.0, 0.2).unwrap();
    assert!(!fex_window_satisfied(&params));

    let problem = Problem::TravelingWave { eps_interface: eps };
    let spec = problem.grid(96).unwrap();
    let phi0 = problem.initial_field(&spec).unwrap();
    let mut fex = Some(phi0.clone());
    let mut rlb = phi0;
    let mut fex_diverged = false;
    for _ in 0..150 {
        rlb = scheme::step(&rlb, &params).unwrap().0;
        assert!(rlb.max_abs().is_finite(), "closed form went non-finite");
        // the saturated plateau sits near 33 at this weight
        assert!(rlb.max_abs() <= 100.0, "closed form left the bounded regime");
        if let Some(prev) = fex.take() {
            match baselines::fex_fd_step(&prev, &params) {
                Ok(next) if next.max_abs() > 1e6 => fex_diverged = true,
                // a non-finite node is how a blown-up run surfaces
                Err(_) => fex_diverged = true,
                Ok(next) => fex = Some(next),
            }
        }
    }
    assert!(fex_diverged, "explicit update never diverged");
}
