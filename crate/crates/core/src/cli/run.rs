use super::output::{Artifacts, CsvTable};
use super::{CliError, Command, Invocation, OracleCase, OracleSection};
use crate::bath_oracle::{build_bath, oracle_evolve, OracleInit, OracleOptions};
use crate::kernel::{self, BandEdgeModel};
use crate::meanfield::{self, DephasingSpec, TransparentSearch};
use crate::noise;
use crate::quantum::{self, EnsembleSpec, T0Policy};
use crate::series::{self, Grid, InitialStateSpec, TimeSeries};
use crate::{lowexc, volterra, Complex64};
use serde_json::{json, Value};

pub(super) fn dispatch(inv: &Invocation) -> Result<Artifacts, CliError> {
    let mut art = match inv.command {
        Command::Kernel => kernel_cmd(inv),
        Command::Osc => osc(inv),
        Command::Spectrum => spectrum(inv),
        Command::Meanfield => meanfield_cmd(inv),
        Command::Transparent => transparent(inv),
        Command::Ensemble => ensemble(inv),
        Command::Noise => noise_cmd(inv),
        Command::Stochastic => stochastic(inv),
        Command::OracleCompare { .. } => oracle_compare(inv),
    }?;
    let checked = matches!(inv.command, Command::Meanfield | Command::Transparent);
    if inv.convergence_check && !checked {
        art.warnings.push(format!("--convergence-check has no effect for `{}`", inv.command.name()));
    }
    Ok(art)
}

fn model(inv: &Invocation) -> BandEdgeModel {
    inv.config.model.unwrap_or_else(BandEdgeModel::isotropic)
}

fn deltas(inv: &Invocation) -> Vec<f64> {
    inv.config.deltas.clone().unwrap_or_else(|| vec![0.0])
}

fn grid(inv: &Invocation, default: Grid) -> Grid {
    inv.config.grid.unwrap_or(default)
}

fn model_meta(m: &BandEdgeModel) -> String {
    format!("model = {}", serde_json::to_string(m).unwrap_or_default())
}

fn tag(delta: f64) -> String {
    format!("delta{delta}")
}

fn log_space(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(CliError::Config(format!("need 0 < min < max and at least 2 points, got [{lo}, {hi}] x {n}")));
    }
    let r = (hi / lo).ln();
    Ok((0..n).map(|i| lo * (r * i as f64 / (n - 1) as f64).exp()).collect())
}

fn max_abs_diff(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn kernel_cmd(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    if matches!(m, BandEdgeModel::FreeSpace { .. }) {
        return Err(CliError::Config("the free-space kernel is a delta function and has no lag grid".into()));
    }
    let sec = inv.config.kernel.clone().unwrap_or_default();
    let lags = match sec.lags {
        Some(l) => l,
        None => log_space(sec.lag_min, sec.lag_max, sec.n_lags)?,
    };
    let full = matches!(m, BandEdgeModel::IsotropicFull { .. });
    let mut cols = vec![
        ("dtau", "lag, collective time"),
        ("re_g", "Re G"),
        ("im_g", "Im G"),
        ("abs_g", "|G|"),
        ("arg_g", "arg G, rad"),
    ];
    if full {
        cols.extend([
            ("re_lower", "Re G, lower band"),
            ("im_lower", "Im G, lower band"),
            ("re_upper", "Re G, upper band"),
            ("im_upper", "Im G, upper band"),
        ]);
    }
    let mut art = Artifacts::default();
    let mut summary = Vec::new();
    for d in deltas(inv) {
        let mut t = CsvTable::new(format!("kernel_{}", tag(d)), &cols).meta(model_meta(&m)).meta(format!("delta_c = {d}"));
        for &lag in &lags {
            let g = kernel::memory_kernel(&m, d, lag)?;
            let mut row = vec![lag, g.re, g.im, g.norm(), g.arg()];
            if full {
                let (lo, up) = kernel::full_dispersion_branches(&m, d, lag)?;
                row.extend([lo.re, lo.im, up.re, up.im]);
            }
            t.push(row);
        }
        summary.push(json!({ "delta_c": d, "n_lags": lags.len() }));
        art.tables.push(t);
    }
    art.summary = json!({ "model": m, "kernels": summary });
    Ok(art)
}

fn osc(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    let g = grid(inv, Grid::new(20.0, 0.01));
    let n = g.n_steps()?;
    let q0s = inv.config.osc.clone().unwrap_or_default().q0;
    let mut cols: Vec<(String, String)> = vec![
        ("tau".into(), "collective time".into()),
        ("re_b".into(), "Re B, atom amplitude".into()),
        ("im_b".into(), "Im B".into()),
        ("population".into(), "|B|^2, excited fraction".into()),
    ];
    for q in &q0s {
        cols.push((format!("mandel_q_{q}"), format!("Mandel Q for Q(0) = {q}")));
    }
    let col_refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut art = Artifacts::default();
    let mut summary = Vec::new();
    for d in deltas(inv) {
        let b = lowexc::amplitude_series(&m, d, g.dtau, n)?;
        let mut t = CsvTable::new(format!("osc_{}", tag(d)), &col_refs).meta(model_meta(&m)).meta(format!("delta_c = {d}"));
        for (i, z) in b.iter().enumerate() {
            let pop = z.norm_sqr();
            let mut row = vec![i as f64 * g.dtau, z.re, z.im, pop];
            row.extend(q0s.iter().map(|&q| lowexc::mandel_q_from_population(pop, q)));
            t.push(row);
        }
        let mut entry = json!({ "delta_c": d, "final_population": b[n].norm_sqr() });
        if matches!(m, BandEdgeModel::IsotropicEffMass { .. }) {
            let sol = lowexc::solve_roots(d)?;
            entry["roots"] = json!(sol.x.iter().map(|x| [x.re, x.im]).collect::<Vec<_>>());
            entry["physical_poles"] = json!(sol.physical_poles());
            entry["steady_population"] = json!(lowexc::steady_population(&sol));
        }
        summary.push(entry);
        art.tables.push(t);
    }
    art.summary = json!({ "model": m, "dtau": g.dtau, "runs": summary });
    Ok(art)
}

fn spectrum(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    if !matches!(m, BandEdgeModel::IsotropicEffMass { .. }) {
        return Err(CliError::Config("the emission spectrum is available for the isotropic model".into()));
    }
    let sec = inv.config.spectrum.clone().unwrap_or_default();
    if sec.n_omega < 2 || !(sec.omega_max > sec.omega_min) {
        return Err(CliError::Config("spectrum needs omega_max > omega_min and n_omega >= 2".into()));
    }
    let w: Vec<f64> = (0..sec.n_omega)
        .map(|i| sec.omega_min + (sec.omega_max - sec.omega_min) * i as f64 / (sec.n_omega - 1) as f64)
        .collect();
    let mut art = Artifacts::default();
    let mut summary = Vec::new();
    for d in deltas(inv) {
        let curve = lowexc::emission_spectrum(d, &w)?;
        let mut t = CsvTable::new(
            format!("spectrum_{}", tag(d)),
            &[("omega", "frequency above the band edge, collective units"), ("density", "emitted spectral density")],
        )
        .meta(format!("delta_c = {d}"));
        for (x, y) in curve.omega_grid.iter().zip(&curve.density) {
            t.push(vec![*x, *y]);
        }
        let peak = curve.omega_grid.iter().zip(&curve.density).max_by(|a, b| a.1.total_cmp(b.1)).map(|p| *p.0);
        summary.push(json!({
            "delta_c": d,
            "integral": lowexc::integrated_spectrum(d)?,
            "fwhm": lowexc::spectrum_fwhm(&curve),
            "peak_omega": peak,
        }));
        art.tables.push(t);
    }
    art.summary = json!({ "runs": summary });
    Ok(art)
}

fn trajectory_table(name: String, s: &TimeSeries) -> CsvTable {
    let mut t = CsvTable::new(
        name,
        &[
            ("tau", "collective time"),
            ("j3", "inversion per atom, -1/2..1/2 scaled to -1..1"),
            ("re_j12", "Re polarization per atom"),
            ("im_j12", "Im polarization per atom"),
            ("abs_j12", "|j12|"),
            ("phase", "unwrapped polarization phase, rad (NaN where |j12| vanishes)"),
            ("emission", "emission rate -dj3/dtau"),
        ],
    );
    let phase = series::phase_angle(s);
    let rate = s.emission_rate();
    for i in 0..s.len() {
        let z = s.j12[i];
        t.push(vec![s.tau(i), s.j3[i], z.re, z.im, z.norm(), phase[i].unwrap_or(f64::NAN), rate[i]]);
    }
    t
}

fn steady_json(s: &TimeSeries, window: f64) -> Value {
    match meanfield::steady_state(s, window) {
        Ok(st) => json!(st),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn meanfield_cmd(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    let g = grid(inv, Grid::new(50.0, 0.01));
    let sec = inv.config.meanfield.clone().unwrap_or_default();
    let init = InitialStateSpec { r: sec.r, phase0: sec.phase0 };
    let mut art = Artifacts::default();
    let mut summary = Vec::new();
    for d in deltas(inv) {
        let s = match sec.dephasing_sigma {
            Some(sigma) => {
                let deph = DephasingSpec { sigma, seed: inv.seed };
                meanfield::dephased_ensemble_mean(&m, d, &init, &g, &deph, sec.dephasing_runs.max(1))?
            }
            None => meanfield::evolve_meanfield(&m, d, &init, &g, None)?,
        };
        let mut t = trajectory_table(format!("meanfield_{}", tag(d)), &s)
            .meta(model_meta(&m))
            .meta(format!("delta_c = {d}, r = {}", sec.r));
        if let Some(sigma) = sec.dephasing_sigma {
            t = t.meta(format!("dephasing sigma = {sigma}, runs = {}", sec.dephasing_runs.max(1)));
        }
        let rate = s.emission_rate();
        let peak = rate.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| s.tau(i));
        let mut entry = json!({
            "delta_c": d,
            "final_j3": s.last().j3,
            "delay_time": s.first_zero_crossing(),
            "peak_emission_time": peak,
            "steady": steady_json(&s, sec.steady_window),
        });
        if let BandEdgeModel::FreeSpace { gamma } = m {
            if sec.dephasing_sigma.is_none() && sec.phase0 == 0.0 {
                let dev = max_abs_diff(s.j3.iter().copied(), (0..s.len()).map(|i| meanfield::free_space_analytic(sec.r, gamma, s.tau(i)).0));
                entry["analytic_max_deviation"] = json!(dev);
            }
        }
        if inv.convergence_check {
            let rep = meanfield::convergence_check(&m, d, &init, &g)?;
            if !rep.passed {
                art.warnings.push(format!("delta_c = {d}: halving dtau changes j3(tau_max) by {:e}", rep.difference));
            }
            entry["convergence"] = json!(rep);
        }
        summary.push(entry);
        art.tables.push(t);
    }
    art.summary = json!({ "model": m, "grid": g, "r": sec.r, "runs": summary });
    Ok(art)
}

fn transparent(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    let sec = inv.config.transparent.clone().unwrap_or_default();
    let search = TransparentSearch {
        r: sec.r,
        lo: sec.lo,
        hi: sec.hi,
        grid: grid(inv, TransparentSearch::default().grid),
        window: sec.window,
        tol: sec.tol,
    };
    let res = meanfield::find_transparent_detuning(&m, &search)?;
    let init = InitialStateSpec::new(search.r);
    let s = meanfield::evolve_meanfield(&m, res.delta_star, &init, &search.grid, None)?;
    let mut art = Artifacts::default();
    art.tables.push(
        trajectory_table("transparent_trajectory".into(), &s)
            .meta(model_meta(&m))
            .meta(format!("delta_c = {} (transparent detuning)", res.delta_star)),
    );
    art.summary = json!({
        "delta_star": res.delta_star,
        "steady": res.steady,
        "evaluations": res.evaluations,
        "search": search,
    });
    if inv.convergence_check {
        let rep = meanfield::convergence_check(&m, res.delta_star, &init, &search.grid)?;
        if !rep.passed {
            art.warnings.push(format!("halving dtau changes j3(tau_max) by {:e}", rep.difference));
        }
        art.summary["convergence"] = json!(rep);
    }
    Ok(art)
}

fn policy_name(p: T0Policy) -> &'static str {
    match p {
        T0Policy::AtZero => "t0_zero",
        T0Policy::AtCrossover => "t0_crossover",
    }
}

fn sample_table(name: String, samples: &[quantum::PolarizationSample], note: String) -> CsvTable {
    let mut t = CsvTable::new(name, &[("kappa", "polarization amplitude N|j12|"), ("phi", "polarization phase, rad")]).meta(note);
    for s in samples {
        t.push(vec![s.kappa, s.phi]);
    }
    t
}

fn ensemble(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    let g = grid(inv, Grid::new(30.0, 0.01));
    let sec = inv.config.ensemble.clone().unwrap_or_default();
    if sec.t0_policies.is_empty() {
        return Err(CliError::Config("t0_policies must name at least one policy".into()));
    }
    let mut art = Artifacts::default();
    let mut summary = Vec::new();
    for d in deltas(inv) {
        let mut means: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = Vec::new();
        for &policy in &sec.t0_policies {
            let spec = EnsembleSpec {
                n_atoms: sec.n_atoms,
                n_realizations: sec.n_realizations,
                t0_policy: policy,
                master_seed: inv.seed,
                model: m,
                delta_c: d,
                grid: g,
                snapshot_times: sec.snapshot_times.clone(),
                histogram_bins: sec.histogram_bins,
            };
            let st = quantum::run_ensemble(&spec)?;
            let stem = format!("{}_{}", policy_name(policy), tag(d));
            let note = format!("delta_c = {d}, N = {}, realizations = {}, t0 = {}", sec.n_atoms, sec.n_realizations, st.tau0);
            let mut mean = CsvTable::new(
                format!("ensemble_mean_{stem}"),
                &[
                    ("tau", "collective time"),
                    ("mean_j3", "ensemble-mean inversion"),
                    ("stderr_j3", "standard error of the mean inversion"),
                    ("abs_mean_j12", "|ensemble-mean polarization|"),
                    ("mean_abs_j12", "ensemble mean of |j12|"),
                ],
            )
            .meta(model_meta(&m))
            .meta(note.clone());
            for i in 0..st.mean_inversion.len() {
                mean.push(vec![
                    i as f64 * st.dtau,
                    st.mean_inversion[i],
                    st.inversion_stderr[i],
                    st.mean_polarization_modulus[i],
                    st.mean_amplitude[i],
                ]);
            }
            let mut hist = CsvTable::new(
                format!("ensemble_delays_{stem}"),
                &[("bin_lo", "delay bin lower edge"), ("bin_hi", "delay bin upper edge"), ("count", "realizations")],
            )
            .meta(note.clone())
            .meta(format!("overflow (no crossing or outside range) = {}", st.delay_histogram.overflow));
            for (k, c) in st.delay_histogram.counts.iter().enumerate() {
                hist.push(vec![st.delay_histogram.edges[k], st.delay_histogram.edges[k + 1], *c as f64]);
            }
            art.tables.push(mean);
            art.tables.push(hist);
            art.tables.push(sample_table(format!("ensemble_initial_{stem}"), &st.initial_samples, format!("{note}; samples at t0")));
            for (k, snap) in st.polarization_snapshots.iter().enumerate() {
                art.tables.push(sample_table(
                    format!("ensemble_snapshot{k}_{stem}"),
                    &snap.samples,
                    format!("{note}; samples at tau = {}", snap.tau),
                ));
            }
            let mut fin = CsvTable::new(
                format!("ensemble_final_{stem}"),
                &[("amplitude", "|j12| at tau_max"), ("phase", "arg j12 at tau_max, rad")],
            )
            .meta(note);
            for (a, p) in st.final_amplitudes.iter().zip(&st.final_phases) {
                fin.push(vec![*a, *p]);
            }
            art.tables.push(fin);
            let delays = &st.delay_times;
            let dm = delays.iter().sum::<f64>() / delays.len().max(1) as f64;
            let dsd = (delays.iter().map(|x| (x - dm).powi(2)).sum::<f64>() / (delays.len().max(2) - 1) as f64).sqrt();
            let amp_mean = st.final_amplitudes.iter().sum::<f64>() / st.final_amplitudes.len() as f64;
            let amp_sd = (st.final_amplitudes.iter().map(|a| (a - amp_mean).powi(2)).sum::<f64>()
                / st.final_amplitudes.len() as f64)
                .sqrt();
            summary.push(json!({
                "delta_c": d,
                "t0_policy": policy,
                "tau0": st.tau0,
                "d_t0_sq": st.d_t0_sq,
                "steady_mean_j3": series::tail_mean(&st.mean_inversion, st.dtau, sec.steady_window),
                "steady_abs_mean_j12": series::tail_mean(&st.mean_polarization_modulus, st.dtau, sec.steady_window),
                "steady_mean_abs_j12": series::tail_mean(&st.mean_amplitude, st.dtau, sec.steady_window),
                "final_amplitude_mean": amp_mean,
                "final_amplitude_sd": amp_sd,
                "final_phase_resultant": quantum::resultant_length(&st.final_phases),
                "delay_mean": dm,
                "delay_sd": dsd,
                "never_crossed": st.delay_histogram.overflow,
            }));
            means.push((st.tau0, st.dtau, st.mean_inversion, st.inversion_stderr));
        }
        if means.len() == 2 {
            let (a, b) = (&means[0], &means[1]);
            // before the later t0 that policy has not started evolving
            let from = (a.0.max(b.0) / a.1).round() as usize;
            let dev = max_abs_diff(a.2[from..].iter().copied(), b.2[from..].iter().copied());
            let dev_all = max_abs_diff(a.2.iter().copied(), b.2.iter().copied());
            let se = a.3.iter().zip(&b.3).map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max);
            summary.push(json!({
                "delta_c": d,
                "compared_from_tau": from as f64 * a.1,
                "policy_max_deviation": dev,
                "policy_max_deviation_all_times": dev_all,
                "max_combined_stderr": se,
            }));
        }
    }
    art.summary = json!({ "model": m, "grid": g, "runs": summary });
    Ok(art)
}

fn noise_lags(sec: &super::NoiseSection, dtau: f64) -> Result<Vec<f64>, CliError> {
    let mut k: Vec<usize> = log_space(sec.lag_min, sec.lag_max, sec.n_lags)?
        .into_iter()
        .map(|l| ((l / dtau).round() as usize).max(1))
        .collect();
    k.dedup();
    Ok(k.into_iter().map(|k| k as f64 * dtau).collect())
}

fn noise_cmd(inv: &Invocation) -> Result<Artifacts, CliError> {
    let sec = inv.config.noise.clone().unwrap_or_default();
    let spec = sec.spec(inv.seed);
    spec.validate()?;
    let dtau = grid(inv, Grid::new(sec.export_span, 0.01)).dtau;
    let lags = noise_lags(&sec, dtau)?;
    let est = noise::ensemble_autocorrelation(&spec, sec.n_paths, dtau, &lags, sec.base_span)?;
    let mut t = CsvTable::new(
        "noise_autocorrelation",
        &[
            ("lag", "lag, collective time"),
            ("estimate", "ensemble and time averaged xi(t) xi(t+lag)"),
            ("expected", "exact expectation for this generator"),
            ("target", "continuum power law"),
            ("rel_error", "(estimate - target)/|target|"),
        ],
    )
    .meta(format!("alpha = {}, n_terms = {}, omega_max = {}, grid = {:?}", spec.alpha, spec.n_terms, spec.omega_max, spec.grid))
    .meta(format!("paths = {}, base span = {}, dtau = {dtau}", sec.n_paths, sec.base_span));
    let mut worst_target: f64 = 0.0;
    let mut worst_expected: f64 = 0.0;
    for (&lag, &e) in lags.iter().zip(&est) {
        let ex = noise::analytic_autocorrelation(&spec, lag);
        let tg = noise::target_autocorrelation(spec.alpha, lag);
        let rel = (e - tg) / tg.abs();
        worst_target = worst_target.max(rel.abs());
        worst_expected = worst_expected.max(((e - ex) / ex.abs()).abs());
        t.push(vec![lag, e, ex, tg, rel]);
    }
    let mut art = Artifacts::default();
    art.tables.push(t);
    if sec.export_paths > 0 {
        let pg = Grid::new(sec.export_span, dtau);
        let paths: Vec<noise::NoisePath> =
            (0..sec.export_paths as u64).map(|i| noise::generate_noise(&spec, &pg, i)).collect::<crate::Result<_>>()?;
        let names: Vec<(String, String)> = std::iter::once(("tau".to_string(), "collective time".to_string()))
            .chain((0..paths.len()).map(|i| (format!("xi_{i}"), format!("noise path {i}"))))
            .collect();
        let refs: Vec<(&str, &str)> = names.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let mut p = CsvTable::new("noise_paths", &refs);
        for i in 0..paths[0].xi.len() {
            let mut row = vec![i as f64 * dtau];
            row.extend(paths.iter().map(|p| p.xi[i]));
            p.push(row);
        }
        art.tables.push(p);
    }
    art.summary = json!({
        "spec": spec,
        "n_paths": sec.n_paths,
        "base_span": sec.base_span,
        "max_rel_error_vs_target": worst_target,
        "max_rel_error_vs_expected": worst_expected,
        "within_5_percent": worst_target <= 0.05,
    });
    Ok(art)
}

fn stochastic(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    let g = grid(inv, Grid::new(15.0, 0.01));
    let sec = inv.config.stochastic.clone().unwrap_or_default();
    let spec = sec.noise.spec(inv.seed);
    let mut art = Artifacts::default();
    let mut summary = Vec::new();
    for &n_atoms in &sec.n_atoms {
        for d in deltas(inv) {
            let ens = noise::stochastic_ensemble(&m, d, n_atoms, &g, &spec, sec.n_paths)?;
            let quantum_mean = if sec.compare_ensemble {
                let spec_q = EnsembleSpec {
                    n_atoms,
                    n_realizations: sec.n_paths,
                    t0_policy: T0Policy::AtCrossover,
                    master_seed: inv.seed,
                    model: m,
                    delta_c: d,
                    grid: g,
                    snapshot_times: Vec::new(),
                    histogram_bins: 40,
                };
                Some(quantum::run_ensemble(&spec_q)?.mean_inversion)
            } else {
                None
            };
            let mut cols = vec![
                ("tau", "collective time"),
                ("mean_j3", "noise-driven ensemble-mean inversion"),
                ("stderr_j3", "standard error of the mean"),
            ];
            if quantum_mean.is_some() {
                cols.push(("ensemble_j3", "quantum-initiated ensemble-mean inversion"));
            }
            let mut t = CsvTable::new(format!("stochastic_n{n_atoms}_{}", tag(d)), &cols)
                .meta(model_meta(&m))
                .meta(format!("delta_c = {d}, N = {n_atoms}, paths = {}", sec.n_paths));
            for i in 0..ens.mean_inversion.len() {
                let mut row = vec![i as f64 * ens.dtau, ens.mean_inversion[i], ens.inversion_stderr[i]];
                if let Some(q) = &quantum_mean {
                    row.push(q[i]);
                }
                t.push(row);
            }
            art.tables.push(t);
            let dm = ens.delay_times.iter().sum::<f64>() / ens.delay_times.len().max(1) as f64;
            summary.push(json!({
                "n_atoms": n_atoms,
                "delta_c": d,
                "delay_mean": dm,
                "never_crossed": ens.never_crossed,
                "max_deviation_from_ensemble": quantum_mean.map(|q| max_abs_diff(ens.mean_inversion.iter().copied(), q)),
            }));
        }
    }
    art.summary = json!({ "model": m, "grid": g, "noise": spec, "runs": summary });
    Ok(art)
}

fn oracle_compare(inv: &Invocation) -> Result<Artifacts, CliError> {
    let m = model(inv);
    let sec: OracleSection = inv.config.oracle.clone().unwrap_or_default();
    let mut art = Artifacts::default();
    let mut summary = Vec::new();
    for d in deltas(inv) {
        let bath = build_bath(&m, d, sec.n_modes, sec.window)?;
        let init = match sec.case {
            OracleCase::Lowexc => OracleInit::LowExcitation,
            OracleCase::Growth => OracleInit::Inverted,
            OracleCase::Meanfield => {
                let s = InitialStateSpec::new(sec.r).state()?;
                OracleInit::MeanField { j3: s.j3, j12: s.j12 }
            }
        };
        let o = oracle_evolve(&bath, init, sec.tau_max, sec.sample_dt, OracleOptions::default())?;
        if o.truncated {
            art.warnings.push(format!(
                "delta_c = {d}: run truncated at the recurrence time {:.4}; widen the window or add modes",
                o.recurrence_time
            ));
        }
        let n_out = o.tau.len();
        let t_end = o.tau[n_out - 1];
        let sub = (sec.sample_dt / 0.005).ceil().max(1.0) as usize;
        let h = sec.sample_dt / sub as f64;
        let n_fine = (n_out - 1) * sub;
        let name = format!("oracle_{}_{}", serde_json::to_value(sec.case).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(), tag(d));
        let meta = format!("delta_c = {d}, modes = {}, window = {}, recurrence time = {}", sec.n_modes, sec.window, o.recurrence_time);
        let (table, dev, identity) = match sec.case {
            OracleCase::Lowexc | OracleCase::Growth => {
                let growth = sec.case == OracleCase::Growth;
                let reference = linear_reference(&m, d, if growth { 1.0 } else { -1.0 }, h, n_fine, sub)?;
                let label = if growth { ("|D|^2", "D") } else { ("|B|^2", "B") };
                let mut t = CsvTable::new(
                    name,
                    &[
                        ("tau", "collective time"),
                        ("oracle", label.0),
                        ("kernel", label.0),
                        ("diff", "oracle - kernel"),
                        ("field", "sum of mode populations"),
                        ("identity", "bookkeeping residual of the oracle"),
                    ],
                )
                .meta(model_meta(&m))
                .meta(meta)
                .meta(format!("amplitude {} from the oracle and from the kernel solver", label.1));
                let mut worst_id: f64 = 0.0;
                for i in 0..n_out {
                    let p = o.j12[i].norm_sqr();
                    let id = if growth { p - 1.0 - o.field_population[i] } else { p + o.field_population[i] - 1.0 };
                    worst_id = worst_id.max(id.abs());
                    t.push(vec![o.tau[i], p, reference[i], p - reference[i], o.field_population[i], id]);
                }
                let dev = if growth {
                    (0..n_out).map(|i| (o.j12[i].norm_sqr() / reference[i] - 1.0).abs()).fold(0.0, f64::max)
                } else {
                    max_abs_diff((0..n_out).map(|i| o.j12[i].norm_sqr()), reference.iter().copied())
                };
                (t, dev, worst_id)
            }
            OracleCase::Meanfield => {
                let init = InitialStateSpec::new(sec.r);
                let s = meanfield::evolve_meanfield(&m, d, &init, &Grid::new(t_end, h), None)?;
                let mut t = CsvTable::new(
                    name,
                    &[
                        ("tau", "collective time"),
                        ("oracle_j3", "inversion from the oracle"),
                        ("meanfield_j3", "inversion from the Volterra solver"),
                        ("diff", "oracle - meanfield"),
                        ("oracle_abs_j12", "|j12| from the oracle"),
                        ("meanfield_abs_j12", "|j12| from the Volterra solver"),
                        ("bloch", "oracle j3^2 + 4|j12|^2 - 1"),
                    ],
                )
                .meta(model_meta(&m))
                .meta(meta)
                .meta(format!("r = {}", sec.r));
                let mut worst_id: f64 = 0.0;
                let mut dev: f64 = 0.0;
                for i in 0..n_out {
                    let k = (i * sub).min(s.len() - 1);
                    let bloch = o.j3[i] * o.j3[i] + 4.0 * o.j12[i].norm_sqr() - 1.0;
                    worst_id = worst_id.max(bloch.abs());
                    dev = dev.max((o.j3[i] - s.j3[k]).abs());
                    t.push(vec![o.tau[i], o.j3[i], s.j3[k], o.j3[i] - s.j3[k], o.j12[i].norm(), s.j12[k].norm(), bloch]);
                }
                (t, dev, worst_id)
            }
        };
        art.tables.push(table);
        summary.push(json!({
            "delta_c": d,
            "max_deviation": dev,
            "deviation_kind": if sec.case == OracleCase::Growth { "relative" } else { "absolute" },
            "max_identity_residual": identity,
            "recurrence_time": o.recurrence_time,
            "truncated": o.truncated,
            "integrator_steps": o.steps,
        }));
    }
    art.summary = json!({ "model": m, "case": sec.case, "n_modes": sec.n_modes, "window": sec.window, "runs": summary });
    Ok(art)
}

/// |B|² (sign −1) or |D|² (sign +1) from the kernel side, sampled every `sub` steps.
fn linear_reference(m: &BandEdgeModel, d: f64, sign: f64, h: f64, n: usize, sub: usize) -> Result<Vec<f64>, CliError> {
    let z: Vec<Complex64> = match m {
        BandEdgeModel::IsotropicEffMass { .. } => {
            let sol = lowexc::solve_roots_signed(d, -sign)?;
            (0..=n).step_by(sub).map(|i| lowexc::amplitude(&sol, i as f64 * h)).collect::<crate::Result<_>>()?
        }
        BandEdgeModel::FreeSpace { gamma } => {
            (0..=n).step_by(sub).map(|i| Complex64::new((sign * 0.5 * gamma * i as f64 * h).exp(), 0.0)).collect()
        }
        _ => volterra::solve_linear(m, d, sign, h, n.max(1))?.into_iter().step_by(sub).collect(),
    };
    Ok(z.iter().map(|z| z.norm_sqr()).collect())
}
