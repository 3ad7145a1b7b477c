//! One function per scenario: build states from the configuration, run the
//! simulation, and collect scalars, CSV grids and the trust block.

use std::f64::consts::FRAC_PI_2;

use mesoscope_core::conditioning::{
    best_fit_squeezed_fock, condition_on_quadrature, local_maxima, pump_quadrature_density, qnd_xppx_protocol,
    sample_outcome, squeezed_fock_states, trapezoid, uniform_grid, xp_px, QndMode, QndSettings,
};
use mesoscope_core::fock::{projected_expectation, quadrature_wavefunction, rotated_quadrature_wavefunction};
use mesoscope_core::frame::{gif_evolve, integrate_frame, reconstruct_lab_state, GifState};
use mesoscope_core::merit::{goldilocks_region, max_feasible_n, mesoscopic_bound, opo_threshold_energy, GoldilocksParams};
use mesoscope_core::opa::{
    charge_expectation, classify_regime, evolve_phase_matched, full_oracle_evolve, full_oracle_trajectory,
    phase_matched_area, ponderomotive_model,
};
use mesoscope_core::phase_space::{default_wigner_axes, negativity_volume, state_fidelity, wigner, wigner_marginal, Axis, WignerGrid};
use mesoscope_core::{Error, FockVector, GaussianFrame, HamiltonianSpec, Result, Trust, C64};
use serde_json::{json, Value};

use crate::config::{ModelKind, OutcomeChoice, QndModeName, Scenario, ScenarioConfig, StateKind, StateSpec};
use crate::output::{csv_columns, Artifact};

/// Everything a scenario produces besides the files written by the runner.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub results: Value,
    pub trust: Trust,
    pub warnings: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    match cfg.scenario {
        Scenario::Oracle => oracle(cfg),
        Scenario::Gif => gif(cfg),
        Scenario::Condition => condition(cfg),
        Scenario::QndXppx => qnd(cfg),
        Scenario::Wigner => wigner_scenario(cfg),
        Scenario::Fom => fom(cfg),
    }
}

fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

fn pump_amplitude(cfg: &ScenarioConfig) -> C64 {
    C64::new(0.0, cfg.physics.n.sqrt())
}

/// A normalized single-mode state and the probability lost to truncation.
pub fn prepare_state(spec: &StateSpec, dim: usize, pump: bool, cfg: &ScenarioConfig) -> Result<(FockVector, f64)> {
    let alpha = C64::new(spec.alpha[0], spec.alpha[1]);
    let kind = match spec.kind {
        StateKind::Auto if pump && cfg.scenario != Scenario::QndXppx => StateKind::MeanField,
        StateKind::Auto => StateKind::Vacuum,
        k => k,
    };
    let raw = match kind {
        StateKind::Vacuum | StateKind::Auto => FockVector::vacuum(&[dim]),
        StateKind::Fock => {
            if spec.level >= dim {
                return Err(Error::InvalidArgument(format!("Fock level {} needs more than {dim} levels", spec.level)));
            }
            FockVector::basis(&[dim], &[spec.level])
        }
        StateKind::Coherent => FockVector::coherent(dim, alpha),
        StateKind::MeanField => FockVector::coherent(dim, pump_amplitude(cfg)),
        StateKind::Squeezed => {
            let amps = squeezed_fock_states(dim, spec.r, spec.phi, 0).swap_remove(0);
            FockVector::new(vec![dim], amps)?
        }
        StateKind::Cat => {
            let plus = FockVector::coherent(dim, alpha);
            let minus = FockVector::coherent(dim, -alpha);
            let amps: Vec<C64> = plus.amplitudes().iter().zip(minus.amplitudes()).map(|(a, b)| a + b).collect();
            let full = 2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp());
            let v = FockVector::new(vec![dim], amps.iter().map(|a| a / full.sqrt()).collect())?;
            let lost = (1.0 - v.norm().powi(2)).max(0.0);
            return Ok((v.normalized()?, lost));
        }
    };
    let lost = (1.0 - raw.norm().powi(2)).max(0.0);
    Ok((raw.normalized()?, lost))
}

fn prep_trust(tol: f64, states: &[&(FockVector, f64)]) -> Trust {
    let mut t = Trust::with_tolerance(tol);
    for (s, lost) in states {
        t.tail_mass = t.tail_mass.max(*lost).max(s.tail_mass());
    }
    t
}

fn spec_of(cfg: &ScenarioConfig) -> HamiltonianSpec {
    HamiltonianSpec::chi2(cfg.physics.g, cfg.physics.delta)
}

fn mean_photons(state: &FockVector, mode: usize) -> f64 {
    state.photon_distribution(mode).iter().enumerate().map(|(k, p)| k as f64 * p).sum()
}

fn oracle(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let tr = &cfg.truncation;
    let signal = prepare_state(&cfg.signal, tr.signal, false, cfg)?;
    let pump = prepare_state(&cfg.pump, tr.pump, true, cfg)?;
    let psi0 = FockVector::tensor(&signal.0, &pump.0)?;
    let spec = spec_of(cfg);
    let run = full_oracle_trajectory(&spec, &psi0, cfg.physics.t, cfg.physics.dt, tr.tail_tolerance)?;
    let weights = spec.charge_weights().unwrap_or_default();

    let mut rows = vec![[0.0, mean_photons(&psi0, 0), mean_photons(&psi0, 1), run.initial_charge, 1.0]];
    for (t, s) in &run.samples {
        let f = psi0.inner(s)?.norm_sqr();
        rows.push([*t, mean_photons(s, 0), mean_photons(s, 1), charge_expectation(s, &weights), f]);
    }
    let fidelity = psi0.inner(&run.state)?.norm_sqr();
    let trust = run.trust.merge(prep_trust(tr.tail_tolerance, &[&signal, &pump]));
    let results = json!({
        "fidelity_to_input": fidelity,
        "initial_charge": run.initial_charge,
        "final_charge": run.final_charge,
        "charge_drift": (run.final_charge - run.initial_charge).abs(),
        "mean_photons": { "signal": mean_photons(&run.state, 0), "pump": mean_photons(&run.state, 1) },
        "steps": run.samples.len(),
        "dims": run.state.dims(),
        "norm": run.state.norm(),
    });
    Ok(ScenarioOutput {
        results,
        trust,
        warnings: Vec::new(),
        artifacts: vec![Artifact::new(
            "trajectory.csv",
            csv_columns(&["t", "n_signal", "n_pump", "charge", "fidelity_to_input"], rows.iter().map(|r| r.to_vec())),
        )],
    })
}

fn initial_frame(cfg: &ScenarioConfig) -> GaussianFrame {
    let alpha = match cfg.signal.kind {
        StateKind::Coherent => C64::new(cfg.signal.alpha[0], cfg.signal.alpha[1]),
        _ => C64::default(),
    };
    let beta = match cfg.pump.kind {
        StateKind::Coherent => C64::new(cfg.pump.alpha[0], cfg.pump.alpha[1]),
        _ => pump_amplitude(cfg),
    };
    GaussianFrame::opa(alpha, beta)
}

fn frame_json(frame: &GaussianFrame) -> Value {
    let modes: Vec<Value> = frame
        .modes
        .iter()
        .map(|m| json!({ "alpha": complex(m.alpha), "mu": complex(m.mu), "nu": complex(m.nu), "role": format!("{:?}", m.role) }))
        .collect();
    json!({ "time": frame.time, "modes": modes, "symplectic_defect": frame.symplectic_defect() })
}

fn gif(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let tr = &cfg.truncation;
    let p = &cfg.physics;
    let spec = spec_of(cfg);
    let frame0 = initial_frame(cfg);
    let initial = GifState { frame: frame0.clone(), residual: FockVector::vacuum(&[tr.residual_signal, tr.residual_pump]) };
    let out = gif_evolve(&spec, &initial, p.t, p.dt, tr.tail_tolerance)?;
    let mut trust = out.trust;

    let traj = integrate_frame(&spec, &frame0, p.t, p.dt)?;
    let rows = traj.samples.iter().map(|f| {
        let (s, b) = (&f.modes[0], &f.modes[1]);
        vec![f.time, s.alpha.re, s.alpha.im, b.alpha.re, b.alpha.im, s.mu.norm(), s.nu.norm(), f.symplectic_defect()]
    });
    let frame_csv = csv_columns(&["t", "alpha_re", "alpha_im", "beta_re", "beta_im", "mu_abs", "nu_abs", "symplectic_defect"], rows);

    let residual = &out.state.residual;
    let mut results = json!({
        "frame": frame_json(&out.state.frame),
        "steps": out.steps,
        "residual": {
            "dims": residual.dims(),
            "mean_photons": [mean_photons(residual, 0), mean_photons(residual, 1)],
            "tail_masses": residual.tail_masses(),
        },
        "frame_error_estimate": traj.error_estimate,
        "classical_charge_drift": traj.max_charge_drift,
    });
    if cfg.model.compare_oracle {
        let dims = [tr.signal, tr.pump];
        let a0 = frame0.modes[0].alpha;
        let b0 = frame0.modes[1].alpha;
        let lab0 = FockVector::tensor(
            &FockVector::coherent(dims[0], a0).normalized()?,
            &FockVector::coherent(dims[1], b0).normalized()?,
        )?;
        let oracle = full_oracle_evolve(&spec, &lab0, p.t, p.dt, tr.tail_tolerance)?;
        let lab = reconstruct_lab_state(&out.state, &dims, tr.tail_tolerance)?;
        let fidelity = state_fidelity(&lab, &oracle.state)?;
        trust = trust.merge(oracle.trust);
        trust.tail_mass = trust.tail_mass.max(lab.tail_mass()).max(1.0 - FockVector::coherent(dims[1], b0).norm().powi(2));
        results["oracle"] = json!({
            "dims": dims,
            "fidelity": fidelity,
            "reconstructed_norm": lab.norm(),
            "charge_drift": (oracle.final_charge - oracle.initial_charge).abs(),
        });
    }
    Ok(ScenarioOutput { results, trust, warnings: Vec::new(), artifacts: vec![Artifact::new("frame.csv", frame_csv)] })
}

fn outcome_grid(cfg: &ScenarioConfig) -> Vec<f64> {
    let e = cfg.grid.outcome_extent;
    let points = (2.0 * e / cfg.grid.resolution).round() as usize + 1;
    uniform_grid(-e, e, points.max(2))
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

/// Wigner grid, sidecar and marginals of a single-mode state.
fn phase_space_artifacts(state: &FockVector, cfg: &ScenarioConfig, prefix: &str) -> Result<(WignerGrid, Vec<Artifact>, Value)> {
    let (xs, ps) = default_wigner_axes(state, cfg.grid.extent, cfg.grid.points)?;
    let grid = wigner(state, &xs, &ps)?;
    let mx = wigner_marginal(&grid, Axis::X);
    let mp = wigner_marginal(&grid, Axis::P);
    let px: Vec<f64> = quadrature_wavefunction(state, 0, &xs)?.iter().map(|z| z.norm_sqr()).collect();
    let pp: Vec<f64> = rotated_quadrature_wavefunction(state, 0, FRAC_PI_2, &ps)?.iter().map(|z| z.norm_sqr()).collect();
    let sup_x = mx.iter().zip(&px).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sup_p = mp.iter().zip(&pp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let lobes = local_maxima(&xs, &mx, 0.1);
    let summary = json!({
        "negativity_volume": negativity_volume(&grid),
        "norm_defect": grid.norm_defect,
        "min": grid.values.iter().copied().fold(f64::INFINITY, f64::min),
        "max": grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "marginal_mismatch": { "x": sup_x, "p": sup_p },
        "x_marginal_lobes": lobes.iter().map(|(x, h)| json!({ "x": x, "height": h })).collect::<Vec<_>>(),
        "x_range": [xs[0], xs[xs.len() - 1]],
        "p_range": [ps[0], ps[ps.len() - 1]],
    });
    let artifacts = vec![
        Artifact::new(format!("{prefix}wigner.csv"), grid.to_csv()),
        Artifact::new(format!("{prefix}wigner.json"), format!("{:#}\n", grid.sidecar())),
        Artifact::new(
            format!("{prefix}marginal_x.csv"),
            csv_columns(&["x", "wigner_marginal", "quadrature_density"], xs.iter().zip(&mx).zip(&px).map(|((a, b), c)| vec![*a, *b, *c])),
        ),
        Artifact::new(
            format!("{prefix}marginal_p.csv"),
            csv_columns(&["p", "wigner_marginal", "quadrature_density"], ps.iter().zip(&mp).zip(&pp).map(|((a, b), c)| vec![*a, *b, *c])),
        ),
    ];
    Ok((grid, artifacts, summary))
}

fn condition(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let tr = &cfg.truncation;
    let p = &cfg.physics;
    let m = &cfg.model;
    let spec = spec_of(cfg);
    let dims = [tr.residual_signal, tr.residual_pump];
    let initial = GifState { frame: initial_frame(cfg), residual: FockVector::vacuum(&dims) };
    let out = gif_evolve(&spec, &initial, p.t, p.dt, tr.tail_tolerance)?;
    let residual = &out.state.residual;
    let theta = m.readout_angle.unwrap_or(match m.kind {
        ModelKind::PhaseMatched => FRAC_PI_2,
        ModelKind::PhaseMismatched => 0.0,
    });
    let xs = outcome_grid(cfg);
    let density = pump_quadrature_density(residual, theta, &xs)?;
    let outcome = match m.outcome {
        OutcomeChoice::Peak => xs[argmax(&density)],
        OutcomeChoice::Sample => sample_outcome(&xs, &density, cfg.seed.unwrap_or_default())?,
        OutcomeChoice::Value => m.outcome_value,
    };
    let cond = condition_on_quadrature(residual, theta, outcome)?;
    let state = &cond.conditional_state;
    let (_, mut artifacts, wigner_summary) = phase_space_artifacts(state, cfg, "")?;
    artifacts.insert(0, Artifact::new("density.csv", csv_columns(&["outcome", "density"], xs.iter().zip(&density).map(|(x, d)| vec![*x, *d]))));

    let regime = classify_regime(p.n, p.g, p.delta);
    let mut results = json!({
        "model": m.kind,
        "regime": regime,
        "readout_angle": theta,
        "outcome": outcome,
        "outcome_density": cond.density,
        "density_integral": trapezoid(&xs, &density),
        "frame": frame_json(&out.state.frame),
        "steps": out.steps,
        "conditional_state": {
            "dims": state.dims(),
            "tail_mass": state.tail_mass(),
            "mean_photons": mean_photons(state, 0),
        },
        "wigner": wigner_summary,
    });
    match m.kind {
        ModelKind::PhaseMatched => {
            let eff = evolve_phase_matched(&FockVector::vacuum(&dims), p.n, p.g, p.t)?;
            let eff_cond = condition_on_quadrature(&eff, theta, outcome)?;
            results["effective"] = json!({
                "interaction_area": phase_matched_area(p.n, p.g, p.t),
                "fidelity": state_fidelity(state, &eff_cond.conditional_state)?,
                "density_at_outcome": eff_cond.density,
            });
        }
        ModelKind::PhaseMismatched => {
            let model = ponderomotive_model(p.n, p.g, p.delta, pump_amplitude(cfg).arg())?;
            let mut fits = Vec::new();
            for (y, d) in local_maxima(&xs, &density, 0.01) {
                let c = condition_on_quadrature(residual, theta, y)?;
                let fit = best_fit_squeezed_fock(&c.conditional_state, m.k_max, 1.5)?;
                fits.push(json!({ "outcome": y, "density": d, "k": fit.k, "r": fit.r, "phi": fit.phi, "fidelity": fit.fidelity }));
            }
            let here = best_fit_squeezed_fock(state, m.k_max, 1.5)?;
            results["ponderomotive"] = json!({
                "u": model.u,
                "big_delta": model.big_delta,
                "g_eff": model.g_eff,
                "readout_angle": model.readout_angle,
            });
            results["squeezed_fock_fits"] = json!(fits);
            results["outcome_fit"] = json!({ "k": here.k, "r": here.r, "phi": here.phi, "fidelity": here.fidelity });
        }
    }
    Ok(ScenarioOutput { results, trust: out.trust, warnings: Vec::new(), artifacts })
}

fn qnd(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let tr = &cfg.truncation;
    let p = &cfg.physics;
    let signal = prepare_state(&cfg.signal, tr.signal, false, cfg)?;
    let pump = prepare_state(&cfg.pump, tr.pump, true, cfg)?;
    let settings = QndSettings {
        lambda: p.lambda,
        g: p.g,
        t: p.t,
        mode: match cfg.model.qnd_mode {
            QndModeName::Effective => QndMode::Effective,
            QndModeName::Exact => QndMode::Exact,
            QndModeName::ExactLiteral => QndMode::ExactLiteral,
        },
        outcomes: outcome_grid(cfg),
        shots: cfg.model.shots,
        seed: cfg.seed.unwrap_or_default(),
        tail_tolerance: tr.tail_tolerance,
    };
    let res = qnd_xppx_protocol(&signal.0, &pump.0, &settings)?;
    let direct = projected_expectation(&xp_px(1), &signal.0)?.re;
    let trust = res.trust.merge(prep_trust(tr.tail_tolerance, &[&signal, &pump]));
    let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    let results = json!({
        "mode": res.mode,
        "lambda": res.lambda,
        "g": res.g,
        "t": res.t,
        "measurement_strength": res.g * res.lambda * res.t,
        "x_b_initial": res.x_b_initial,
        "density_integral": res.density_integral,
        "inferred_mean": res.inferred_mean,
        "direct_expectation": direct,
        "relative_error": if direct.abs() > 1e-12 { json!((res.inferred_mean - direct).abs() / direct.abs()) } else { Value::Null },
        "shots": res.shots,
        "sample_mean": finite(res.sample_mean),
        "standard_error": finite(res.standard_error),
        "first_shot": res.first_shot.as_ref().map(|s| json!({
            "outcome": s.outcome,
            "density": s.density,
            "xp_px": projected_expectation(&xp_px(1), &s.conditional_state).map(|z| z.re).unwrap_or(f64::NAN),
        })),
    });
    let artifacts = vec![Artifact::new(
        "density.csv",
        csv_columns(&["x_b", "density"], res.outcomes.iter().zip(&res.density).map(|(x, d)| vec![*x, *d])),
    )];
    Ok(ScenarioOutput { results, trust, warnings: res.warnings.clone(), artifacts })
}

fn wigner_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let prepared = prepare_state(&cfg.signal, cfg.truncation.signal, false, cfg)?;
    let state = &prepared.0;
    let (_, artifacts, summary) = phase_space_artifacts(state, cfg, "")?;
    let origin = wigner(state, &[0.0], &[0.0])?.values[0];
    let mut trust = prep_trust(cfg.truncation.tail_tolerance, &[&prepared]);
    trust.norm_drift = (state.norm() - 1.0).abs();
    let results = json!({
        "state": cfg.signal.kind,
        "dims": state.dims(),
        "w_origin": origin,
        "mean_photons": mean_photons(state, 0),
        "wigner": summary,
    });
    Ok(ScenarioOutput { results, trust, warnings: Vec::new(), artifacts })
}

fn fom(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let f = &cfg.fom;
    let mut params = GoldilocksParams::log_grid(f.n_min, f.n_max, f.n_points, f.gt_max, f.gt_points, f.g_max, f.g_over_kappa);
    params.zeta_target = f.zeta_target;
    let region = goldilocks_region(&params);
    let energy = opo_threshold_energy(f.wavelength, f.kappa_over_g)?;
    let cell = |edge: Option<f64>| {
        edge.and_then(|e| params.n_grid.iter().position(|n| *n == e)).map(|i| {
            let next = params.n_grid.get(i + 1).copied().unwrap_or(f64::NAN);
            json!([params.n_grid[i], next])
        })
    };
    let results = json!({
        "mesoscopic_bound": mesoscopic_bound(f.g_max),
        "max_feasible_n": max_feasible_n(&params, f.n_min, f.n_max),
        "right_boundary": region.right_boundary(),
        "right_boundary_cell": cell(region.right_boundary()),
        "mask_right_boundary": region.mask_right_boundary(),
        "empty": region.is_empty(),
        "feasible_points": region.feasible.iter().filter(|v| **v).count(),
        "domain_errors": region.domain_errors.len(),
        "threshold_energy": { "joules": energy.joules, "photons": energy.photons, "wavelength": f.wavelength, "kappa_over_g": f.kappa_over_g },
        "time_unit": "gt",
    });
    Ok(ScenarioOutput {
        results,
        trust: Trust::with_tolerance(cfg.truncation.tail_tolerance),
        warnings: Vec::new(),
        artifacts: vec![
            Artifact::new("goldilocks.csv", region.to_csv()),
            Artifact::new("goldilocks.json", format!("{:#}\n", region.sidecar())),
        ],
    })
}
