use std::fmt::Write as _;
use std::path::Path;

use lul_core::frontier::{self, Family, Frontier, KappaSource, SimulatedMamlSpec, SweepAxis, SweepSpec};
use lul_core::{bounds, engine, matrix, popfile, rng, verify, world};
use lul_core::{OptimizerKind, Population, PopulationSpec, RunConfig, RunMode, ServerOptSpec, SpectrumBounds};
use serde_json::json;

use crate::svg::{self, Series};
use crate::{
    CliError, Format, FrontierArgs, KappaSourceArg, MadCheckArgs, MamlSimArgs, ModeArg, Output, SimulateArgs, ThetaArg,
    TightnessArgs, TightnessFamily, VerifyArgs, Vary,
};

const SCHEMA_VERSION: u32 = 1;

type CmdResult = Result<(), CliError>;

fn read_population_file(path: &Path) -> Result<Population, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    popfile::read_population(&text).map_err(|e| match e {
        lul_core::Error::Parse { line, message } => {
            CliError::Core(lul_core::Error::Parse { line, message: format!("{}: {message}", path.display()) })
        }
        other => CliError::Core(other),
    })
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn no_svg(out: &Output, command: &str) -> CmdResult {
    if out.format == Format::Svg {
        return Err(CliError::Usage(format!("`{command}` has no SVG output; use csv or json")));
    }
    Ok(())
}

fn optimizer_kinds(list: &[crate::OptArg]) -> Vec<OptimizerKind> {
    let mut kinds: Vec<OptimizerKind> = Vec::new();
    for &o in list {
        let k = OptimizerKind::from(o);
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    kinds
}

fn positive_range(name: &str, lo: f64, hi: f64) -> CmdResult {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(CliError::Usage(format!("{name} range must satisfy 0 < min <= max, got [{lo}, {hi}]")));
    }
    Ok(())
}

fn frontier_series(f: &Frontier, prefix: &str) -> Vec<Series> {
    f.optimizers()
        .into_iter()
        .map(|kind| Series { label: format!("{prefix}{}", kind.name()), points: f.series(kind) })
        .collect()
}

pub fn frontier(a: &FrontierArgs, out: &Output) -> CmdResult {
    let family = match a.theta {
        ThetaArg::FirstK => Family::FedAvg,
        ThetaArg::KOnly => Family::Maml,
        other => return Err(CliError::Usage(format!("frontier needs --theta first-k or k-only, got {other:?}"))),
    };
    let kappa_source = match a.kappa_source {
        KappaSourceArg::ClosedForm => KappaSource::ClosedForm,
        KappaSourceArg::Exact => KappaSource::ExactSpectral,
    };
    let population = match &a.input {
        Some(path) if kappa_source == KappaSource::ExactSpectral => Some(read_population_file(path)?),
        Some(_) => return Err(CliError::Usage("--input requires --kappa-source exact".into())),
        None => None,
    };
    let (mu, ell) = match &population {
        Some(p) => (p.bounds().mu, p.bounds().ell),
        None => (a.mu, a.ell),
    };
    if a.points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    let axis = match a.vary {
        Vary::K => SweepAxis::K(frontier::log_int_grid(a.k_max.max(1), a.points)),
        Vary::Gamma => {
            let hi = a.gamma_max.unwrap_or(0.999 / (ell + a.alpha));
            positive_range("gamma", a.gamma_min, hi)?;
            SweepAxis::Gamma(frontier::log_grid(a.gamma_min, hi, a.points))
        }
        Vary::Alpha => {
            positive_range("alpha", a.alpha_min, a.alpha_max)?;
            SweepAxis::Alpha(frontier::log_grid(a.alpha_min, a.alpha_max, a.points))
        }
    };
    let spec = SweepSpec {
        family,
        axis,
        mu,
        ell,
        alpha: a.alpha,
        gamma: a.gamma.rule(),
        k: a.k,
        optimizers: optimizer_kinds(&a.optimizers),
        kappa_source,
        population,
    };
    let f = frontier::sweep(&spec)?;
    let vary = match a.vary {
        Vary::K => "K",
        Vary::Gamma => "gamma",
        Vary::Alpha => "alpha",
    };
    let text = match out.format {
        Format::Csv => f.to_csv(),
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "frontier",
            "family": family.name(),
            "vary": vary,
            "mu": mu,
            "ell": ell,
            "points": f.points,
            "skipped": f.skipped,
        })),
        Format::Svg => {
            let title = format!("{} frontier, mu = {mu}, L = {ell}, varying {vary}", family.name());
            svg::frontier_plot(&title, &frontier_series(&f, ""))
        }
    };
    out.emit(&text)
}

pub fn maml_sim(a: &MamlSimArgs, seed: u64, out: &Output) -> CmdResult {
    let gamma = match a.gamma {
        crate::GammaArg::HalfInvK => return Err(CliError::Usage("maml-sim needs a K-independent --gamma".into())),
        g => g.resolve(a.ell, a.alpha, 1),
    };
    if a.seeds == 0 || a.points == 0 {
        return Err(CliError::Usage("--seeds and --points must be positive".into()));
    }
    let grid = frontier::log_int_grid(a.k_max.max(1), a.points);
    let optimizers = optimizer_kinds(&a.optimizers);
    let spec = SimulatedMamlSpec {
        dim: a.dim,
        mu: a.mu,
        ell: a.ell,
        alpha: a.alpha,
        gamma,
        k_grid: grid.clone(),
        seed,
        optimizers: optimizers.clone(),
    };
    let seeds: Vec<u64> = (0..a.seeds).map(|i| seed.wrapping_add(i)).collect();
    let sims = frontier::simulated_maml_ensemble(&spec, &seeds)?;
    let mut reference_spec = SweepSpec::k_sweep(Family::FedAvg, a.mu, a.ell, a.alpha, frontier::GammaRule::Fixed(gamma), grid);
    reference_spec.optimizers = optimizers;
    let reference = frontier::sweep(&reference_spec)?;

    let text = match out.format {
        Format::Csv => {
            let mut text = String::new();
            let mut tagged = |f: &Frontier, series: &str, header: bool| {
                for (i, line) in f.to_csv().lines().enumerate() {
                    if i == 0 {
                        if header {
                            let _ = writeln!(text, "{line},series");
                        }
                    } else {
                        let _ = writeln!(text, "{line},{series}");
                    }
                }
            };
            for (j, (f, s)) in sims.iter().zip(&seeds).enumerate() {
                tagged(f, &format!("simulated-seed-{s}"), j == 0);
            }
            tagged(&reference, "fedavg-closed-form", false);
            text
        }
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "maml-sim",
            "dim": a.dim,
            "mu": a.mu,
            "ell": a.ell,
            "alpha": a.alpha,
            "gamma": gamma,
            "simulated": sims.iter().zip(&seeds).map(|(f, s)| json!({"seed": s, "points": f.points})).collect::<Vec<_>>(),
            "fedavg_reference": reference.points,
        })),
        Format::Svg => {
            let mut series = Vec::new();
            for (f, s) in sims.iter().zip(&seeds) {
                series.extend(frontier_series(f, &format!("k-only seed {s}, ")));
            }
            series.extend(frontier_series(&reference, "fedavg closed form, "));
            let title = format!("simulated k-only frontier, d = {}, gamma = {gamma}", a.dim);
            svg::frontier_plot(&title, &series)
        }
    };
    out.emit(&text)
}

fn auto_rounds(rho: f64, kind: OptimizerKind) -> usize {
    if rho <= 0.0 {
        return 1;
    }
    if rho >= 1.0 {
        return 1000;
    }
    let base = (1e-12f64.ln() / rho.ln()).ceil();
    let rounds = if kind == OptimizerKind::Plain { base } else { 1.5 * base + 10.0 };
    rounds.clamp(1.0, 1e6) as usize
}

pub fn simulate(a: &SimulateArgs, seed: u64, out: &Output) -> CmdResult {
    no_svg(out, "simulate")?;
    let pop = match &a.input {
        Some(path) => read_population_file(path)?,
        None => {
            let spec = PopulationSpec {
                dim: a.dim,
                clients: a.clients,
                bounds: SpectrumBounds::new(a.mu, a.ell, a.c_radius)?,
                examples_per_client: a.examples_per_client,
                uniform_weights: a.uniform_weights,
            };
            world::random_population(&spec, seed)?
        }
    };
    if let Some(path) = &a.save_population {
        std::fs::write(path, popfile::write_population(&pop)).map_err(|source| CliError::Write { path: path.clone(), source })?;
    }
    let theta = a.theta.scheme(a.k)?;
    let k_for_gamma = if a.theta == ThetaArg::One { 1 } else { a.k };
    let gamma = a.gamma.resolve(pop.bounds().ell, a.alpha, k_for_gamma);
    let kind = OptimizerKind::from(a.optimizer);

    let report = bounds::kappa_exact(&pop, a.alpha, gamma, &theta)?;
    let (mu_t, l_t) = bounds::surrogate_spectrum(&pop, a.alpha, gamma, &theta)?;
    let opt = match a.step {
        Some(step) => ServerOptSpec { kind, step, momentum: a.momentum.unwrap_or(0.0), auto_tune: false },
        None => {
            let mut o = engine::auto_tune(kind, l_t, mu_t)?;
            if let Some(m) = a.momentum {
                o.momentum = m;
            }
            o
        }
    };
    let rho_predicted = bounds::rho_from_kappa(report.kappa_exact, kind)?;
    let rounds = match a.rounds {
        Some(r) => r,
        None if opt.auto_tune => auto_rounds(bounds::rho_from_kappa(l_t / mu_t, kind)?, kind),
        None => 1000,
    };
    let mut cfg = RunConfig::deterministic(&pop, a.alpha, gamma, theta.clone(), rounds);
    cfg.seed = seed;
    if a.mode == ModeArg::Stochastic {
        cfg.mode = RunMode::Stochastic;
        cfg.clients_per_round = a.clients_per_round.unwrap_or(pop.len());
        cfg.batch_size = a.batch_size;
    }
    let x0 = vec![0.0; pop.dim()];
    let traj = engine::run(&pop, &x0, &cfg, &opt)?;
    let surrogate = world::surrogate_minimizer(&pop, a.alpha, gamma, &theta)?;
    let empirical = world::empirical_minimizer(&pop)?;

    let text = match out.format {
        Format::Json => {
            let last = traj.iterates.last().expect("run keeps x0");
            let dist_s: Vec<f64> = traj.iterates.iter().map(|x| matrix::distance(x, &surrogate)).collect();
            let dist_e: Vec<f64> = traj.iterates.iter().map(|x| matrix::distance(x, &empirical)).collect();
            to_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "simulate",
                "seed": seed,
                "mode": match a.mode { ModeArg::Deterministic => "deterministic", ModeArg::Stochastic => "stochastic" },
                "alpha": a.alpha,
                "gamma": gamma,
                "scheme": theta.tag(),
                "K": theta.size(),
                "optimizer": { "kind": kind.name(), "step": opt.step, "momentum": opt.momentum, "auto_tune": opt.auto_tune },
                "rounds": rounds,
                "kappa_exact": report.kappa_exact,
                "rho_predicted": rho_predicted,
                "minimizer_distance": matrix::distance(&surrogate, &empirical),
                "distance_bound": bounds::distance_bound(&pop, a.alpha, gamma, &theta)?,
                "surrogate_minimizer": surrogate,
                "empirical_minimizer": empirical,
                "final_iterate": last,
                "dist_to_surrogate_opt": dist_s,
                "dist_to_empirical_opt": dist_e,
            }))
        }
        _ => engine::trajectory_csv(&traj, &surrogate, &empirical),
    };
    out.emit(&text)
}

fn report_csv(reports: &[verify::CheckReport]) -> String {
    let mut text = String::from("name,instances,max_violation,pass\n");
    for r in reports {
        let _ = writeln!(text, "{},{},{:.6e},{}", r.name, r.instances, r.max_violation, r.pass);
    }
    text
}

pub fn verify(a: &VerifyArgs, seed: u64, out: &Output) -> CmdResult {
    no_svg(out, "verify")?;
    let reports = match &a.input {
        Some(path) => {
            let pop = read_population_file(path)?;
            let theta = a.theta.scheme(a.k)?;
            let gamma = a.gamma.resolve(pop.bounds().ell, a.alpha, a.k);
            let x = vec![1.0; pop.dim()];
            verify::check_population(&pop, a.alpha, gamma, &theta, &x)?
        }
        None => {
            let names: Vec<&str> = if a.only.is_empty() { verify::SUITES.to_vec() } else { a.only.iter().map(String::as_str).collect() };
            if let Some(bad) = names.iter().find(|n| !verify::SUITES.contains(n)) {
                return Err(CliError::Usage(format!("unknown suite `{bad}`; known suites: {}", verify::SUITES.join(", "))));
            }
            if a.trials == 0 {
                return Err(CliError::Usage("--trials must be positive".into()));
            }
            names.iter().map(|n| verify::run_suite(n, a.trials, seed)).collect::<lul_core::Result<Vec<_>>>()?
        }
    };
    let pass = reports.iter().all(|r| r.pass);
    let text = match out.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "verify",
            "seed": seed,
            "trials": a.trials,
            "pass": pass,
            "checks": reports,
        })),
        _ => report_csv(&reports),
    };
    out.emit(&text)?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub fn mad_check(a: &MadCheckArgs, seed: u64, out: &Output) -> CmdResult {
    no_svg(out, "mad-check")?;
    let mut csv = String::from("kind,index,value,bound,gap,two_point,pass\n");
    let (mut scalar_worst, mut scalar_fail) = (0.0f64, 0usize);
    for t in 0..a.trials {
        let mut s = rng::child(seed, rng::stream_id(15, t as u64));
        let dist = verify::random_distribution(&mut s)?;
        let (m, b) = (bounds::mad(&dist), bounds::mad_bound(&dist));
        let gap = b - m;
        let two = dist.is_two_point();
        let ok = gap >= -1e-12 && if two { gap.abs() <= 1e-12 } else { gap > 1e-12 };
        scalar_worst = scalar_worst.max(-gap);
        scalar_fail += usize::from(!ok);
        let _ = writeln!(csv, "scalar,{t},{m:.16e},{b:.16e},{gap:.6e},{two},{ok}");
    }
    let (mut matrix_worst, mut matrix_fail) = (0.0f64, 0usize);
    for t in 0..a.matrix_trials {
        let mut s = rng::child(seed, rng::stream_id(16, t as u64));
        let (x, y, lo, hi) = verify::random_commuting_family(&mut s)?;
        let m = bounds::matrix_weighted_discrepancy(&x, &y)?;
        let b = bounds::matrix_discrepancy_bound(lo, hi);
        let ok = m <= b + 1e-9;
        matrix_worst = matrix_worst.max(m - b);
        matrix_fail += usize::from(!ok);
        let _ = writeln!(csv, "matrix,{t},{m:.16e},{b:.16e},{:.6e},,{ok}", b - m);
    }
    let pass = scalar_fail == 0 && matrix_fail == 0;
    let text = match out.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "mad-check",
            "seed": seed,
            "pass": pass,
            "scalar": { "instances": a.trials, "failures": scalar_fail, "max_excess": scalar_worst },
            "matrix": { "instances": a.matrix_trials, "failures": matrix_fail, "max_excess": matrix_worst },
        })),
        _ => csv,
    };
    out.emit(&text)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!("{scalar_fail} scalar and {matrix_fail} matrix instances violate the bound")))
    }
}

pub fn tightness(a: &TightnessArgs, out: &Output) -> CmdResult {
    no_svg(out, "tightness")?;
    let mut rows = Vec::new();
    let mut csv = String::new();
    match a.family {
        TightnessFamily::B2 => {
            csv.push_str("family,K,p,distance,distance_bound,two_c,ratio,limit\n");
            let limit = bounds::tightness_b2_limit(a.p);
            for &k in &a.k {
                let (distance, bound) = bounds::tightness_case_b2(k, a.p)?;
                let two_c = 2.0 * bounds::tightness_b2_population(a.p)?.bounds().c_radius;
                let ratio = distance / two_c;
                let _ = writeln!(csv, "b2,{k},{},{distance:.16e},{bound:.16e},{two_c:.16e},{ratio:.16e},{limit:.16e}", a.p);
                rows.push(json!({"K": k, "p": a.p, "distance": distance, "distance_bound": bound, "two_c": two_c, "ratio": ratio, "limit": limit}));
            }
        }
        TightnessFamily::B3 => {
            csv.push_str("family,K,alpha,gamma,scheme,kappa_exact,kappa_closed_form,abs_gap\n");
            let pop = bounds::tightness_b3_population(a.mu, a.ell)?;
            for &k in &a.k {
                let theta = match a.theta {
                    ThetaArg::FirstK | ThetaArg::KOnly => a.theta.scheme(k)?,
                    other => return Err(CliError::Usage(format!("b3 needs --theta first-k or k-only, got {other:?}"))),
                };
                let gamma = a.gamma.resolve(a.ell, a.alpha, k);
                let exact = bounds::kappa_exact(&pop, a.alpha, gamma, &theta)?.kappa_exact;
                let closed = bounds::closed_form_kappa(pop.bounds(), a.alpha, gamma, &theta)?;
                let gap = (exact - closed).abs();
                let _ = writeln!(csv, "b3,{k},{},{gamma:.16e},{},{exact:.16e},{closed:.16e},{gap:.6e}", a.alpha, theta.tag());
                rows.push(json!({"K": k, "alpha": a.alpha, "gamma": gamma, "scheme": theta.tag(), "kappa_exact": exact, "kappa_closed_form": closed, "abs_gap": gap}));
            }
        }
    }
    let text = match out.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "tightness",
            "family": match a.family { TightnessFamily::B2 => "b2", TightnessFamily::B3 => "b3" },
            "rows": rows,
        })),
        _ => csv,
    };
    out.emit(&text)
}
