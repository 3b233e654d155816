use std::fmt::Write as _;

use anyhow::{bail, ensure, Context, Result};
use pmm_core::classify::{classify_infinite, in_good_set, is_active, is_frozen, EventuallyPeriodicConfig};
use pmm_core::connect::{
    certify_finite_holes, certify_finite_particles, certify_good_set, certify_planner, plan_transport,
    shortest_path, validate_path, DEFAULT_BUDGET,
};
use pmm_core::entropy::{entropy_report, MAX_MARGINAL};
use pmm_core::exact::{run_batch, Instance, MarkovModel, Measure};
use pmm_core::hydro::{hydro_experiment, HydroParams};
use pmm_core::kmc::{self, aggregate, run_from_profile, Trajectory};
use pmm_core::lattice::validate_family;
use pmm_core::{Boundary, Configuration, ConstraintFamily};
use rayon::prelude::*;
use serde_json::json;

use crate::manifest::Sink;
use crate::{
    ClassifyArgs, Command, ConnectArgs, EntropyArgs, ExactArgs, HydroArgs, MeasureKind, SimulateArgs, Status,
    Suite,
};

pub fn run(command: &Command, family: &ConstraintFamily, sink: &mut Sink) -> Result<Status> {
    match command {
        Command::Validate(a) => {
            if a.emit {
                sink.emit("family.json", &family.to_json())?;
                return Ok(Status::Ok);
            }
            let report = validate_family(family);
            sink.emit("report.json", &serde_json::to_string_pretty(&report)?)?;
            Ok(if report.accepted() {
                Status::Ok
            } else {
                Status::CheckFailed(format!("family rejected: {}", report.failures.join("; ")))
            })
        }
        Command::Classify(a) => classify(a, sink),
        Command::Connect(a) => connect(a, family, sink),
        Command::Exact(a) => exact(a, family, sink),
        Command::Simulate(a) => simulate(a, family, sink),
        Command::Hydro(a) => hydro(a, family, sink),
        Command::Entropy(a) => entropy(a, family, sink),
        Command::Replay(_) => bail!("nested replay"),
    }
}

fn classify(a: &ClassifyArgs, sink: &mut Sink) -> Result<Status> {
    let mut out = Vec::new();
    for s in &a.configs {
        if s.contains('(') {
            let c: EventuallyPeriodicConfig = s.parse().with_context(|| format!("parsing {s:?}"))?;
            out.push(json!({
                "input": s,
                "kind": "eventually-periodic",
                "minimal": c.minimal().to_string(),
                "label": classify_infinite(&c),
                "frozen": c.is_frozen(),
                "particles": c.particle_count(),
                "holes": c.hole_count(),
                "pairs": c.pair_count(),
            }));
        } else {
            let boundary = if a.ring { Boundary::Periodic } else { Boundary::Empty };
            let c = Configuration::parse(s, a.start, boundary).with_context(|| format!("parsing {s:?}"))?;
            let mut active = Vec::new();
            for x in c.particles() {
                if is_active(&c, x)? {
                    active.push(x);
                }
            }
            out.push(json!({
                "input": s,
                "kind": "finite",
                "start": c.start(),
                "boundary": c.boundary(),
                "particles": c.count(),
                "frozen": is_frozen(&c),
                "active_sites": active,
                "good_set": (boundary == Boundary::Empty).then(|| in_good_set(&c)),
            }));
        }
    }
    sink.emit("classify.json", &serde_json::to_string_pretty(&out)?)?;
    Ok(Status::Ok)
}

fn connect(a: &ConnectArgs, family: &ConstraintFamily, sink: &mut Sink) -> Result<Status> {
    if let Some(n) = a.certify {
        let cert = match a.suite {
            Suite::GoodSet => certify_good_set(family, n),
            Suite::Particles => certify_finite_particles(family, n),
            Suite::Holes => certify_finite_holes(family, n),
            Suite::Planner => certify_planner(family, n),
        }?;
        sink.emit("certificate.json", &serde_json::to_string_pretty(&cert)?)?;
        return Ok(if cert.passed {
            Status::Ok
        } else {
            Status::CheckFailed(format!("{} counterexamples", cert.counterexamples))
        });
    }
    let (from, to) = match (&a.from, &a.to) {
        (Some(f), Some(t)) => (f, t),
        _ => bail!("connect needs two configurations or --certify"),
    };
    let from = Configuration::parse(from, a.start, Boundary::Empty)?;
    let to = Configuration::parse(to, a.start, Boundary::Empty)?;
    ensure!(from.len() == to.len(), "configurations have different lengths");
    let use_planner = !a.bfs && family == &ConstraintFamily::pmm() && in_good_set(&from) && in_good_set(&to)
        && from.count() == to.count();
    let path = if use_planner {
        Some(plan_transport(&from, &to)?)
    } else {
        shortest_path(family, &from, &to, DEFAULT_BUDGET)?
    };
    match path {
        Some(p) => {
            ensure!(validate_path(family, &p), "internal error: path failed replay");
            sink.emit("path.txt", &format!("{}\n", p.format_moves()))?;
            Ok(Status::Ok)
        }
        None => Ok(Status::CheckFailed(format!("{from} and {to} are not connected"))),
    }
}

fn exact(a: &ExactArgs, family: &ConstraintFamily, sink: &mut Sink) -> Result<Status> {
    let (len, boundary) = match (a.ring, a.interval) {
        (Some(l), None) => (l, Boundary::Periodic),
        (None, Some(l)) => (l, Boundary::Empty),
        _ => bail!("give exactly one of --ring and --interval"),
    };
    let instances: Vec<Instance> = a
        .rho
        .iter()
        .map(|&rho| Instance { len, boundary, count: a.count, rho })
        .collect();
    let reports = run_batch(family, &instances, a.tol)
        .into_iter()
        .collect::<pmm_core::Result<Vec<_>>>()?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    let text = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    sink.emit("report.json", &text)?;
    Ok(if failed == 0 {
        Status::Ok
    } else {
        Status::CheckFailed(format!("{failed} instance(s) above tolerance {}", a.tol))
    })
}

fn read_initial(path: &std::path::Path) -> Result<Vec<u8>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.trim()
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => bail!("unexpected character {other:?} in {}", path.display()),
        })
        .collect()
}

fn simulate(a: &SimulateArgs, family: &ConstraintFamily, sink: &mut Sink) -> Result<Status> {
    ensure!(a.horizon >= 0.0 && a.horizon.is_finite(), "horizon must be a finite non-negative time");
    ensure!(a.replicas >= 1, "at least one replica is needed");
    let runs: Vec<Trajectory> = match (&a.init, a.rho) {
        (Some(path), None) => {
            let initial = read_initial(path)?;
            if let Some(l) = a.ring {
                ensure!(l == initial.len(), "--ring {l} does not match the {} sites of --init", initial.len());
            }
            (0..a.replicas as u64)
                .into_par_iter()
                .map(|r| kmc::run(family, initial.clone(), a.horizon, a.samples, a.seed, r))
                .collect::<pmm_core::Result<_>>()?
        }
        (None, Some(rho)) => {
            ensure!((0.0..=1.0).contains(&rho), "density must lie in [0, 1]");
            let l = a.ring.context("--ring is required with --rho")?;
            (0..a.replicas as u64)
                .into_par_iter()
                .map(|r| run_from_profile(family, l, |_| rho, a.horizon, a.samples, a.seed, r))
                .collect::<pmm_core::Result<_>>()?
        }
        _ => bail!("give exactly one of --rho and --init"),
    };
    let (profile, events) = aggregate(&runs);
    let mut csv = String::from("time,site,mean_occupation\n");
    for (t, row) in profile.times.iter().zip(&profile.bins) {
        for (x, v) in row.iter().enumerate() {
            writeln!(csv, "{t},{x},{v}")?;
        }
    }
    sink.emit("profile.csv", &csv)?;
    let l = runs[0].final_sites.len();
    let mut time_average = vec![0.0; l];
    for r in &runs {
        time_average.iter_mut().zip(&r.time_average).for_each(|(m, v)| *m += v / runs.len() as f64);
    }
    let summary = json!({
        "replicas": runs.len(),
        "events": events,
        "particles": runs.iter().map(|r| r.particles).collect::<Vec<_>>(),
        "time_average": time_average,
    });
    sink.file("summary.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(Status::Ok)
}

fn hydro(a: &HydroArgs, family: &ConstraintFamily, sink: &mut Sink) -> Result<Status> {
    let mut params = HydroParams::new(a.len, a.replicas, a.tmacro, a.profile, a.seed);
    params.blocks = a.blocks;
    params.pde_cells = a.cells;
    let report = hydro_experiment(family, &params)?;
    let table = |values: &[f64]| -> Result<String> {
        let mut s = String::from("block,u,density\n");
        let b = values.len() as f64;
        for (i, v) in values.iter().enumerate() {
            writeln!(s, "{i},{},{v}", (i as f64 + 0.5) / b)?;
        }
        Ok(s)
    };
    sink.file("kmc.csv", &table(&report.kmc_blocks)?)?;
    sink.file("pde.csv", &table(&report.pde_blocks)?)?;
    sink.emit("report.json", &serde_json::to_string_pretty(&report)?)?;
    Ok(match a.max_l2 {
        Some(max) if report.discrepancy.l2 > max => {
            Status::CheckFailed(format!("L2 discrepancy {} exceeds {max}", report.discrepancy.l2))
        }
        _ => Status::Ok,
    })
}

fn entropy(a: &EntropyArgs, family: &ConstraintFamily, sink: &mut Sink) -> Result<Status> {
    let model = MarkovModel::build(family, 0, a.ring, Boundary::Periodic, None)?;
    let nu = match a.measure {
        MeasureKind::Mu => Measure::product(&model, a.rho),
        MeasureKind::UniformClass => {
            let class = match &a.class_of {
                Some(s) => {
                    let c = Configuration::parse(s, 0, Boundary::Periodic)?;
                    ensure!(c.len() == a.ring, "--class-of must have {} sites", a.ring);
                    let i = model.index_of(&c).context("configuration outside the model")?;
                    model.class_of(i)
                }
                None => (0..model.classes().len())
                    .max_by_key(|&c| model.classes()[c].len())
                    .context("empty model")?,
            };
            Measure::uniform_on(&model, &model.classes()[class])
        }
        MeasureKind::File => {
            let path = a.input.as_ref().context("--measure file needs --input")?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let weights: Vec<f64> = serde_json::from_str(&text).context("expected a JSON array of weights")?;
            ensure!(weights.len() == model.num_states(), "expected {} weights", model.num_states());
            ensure!(weights.iter().all(|w| *w >= 0.0 && w.is_finite()), "weights must be non-negative");
            let total: f64 = weights.iter().sum();
            ensure!((total - 1.0).abs() <= 1e-9, "weights sum to {total}, not 1");
            Measure::new(weights)
        }
    };
    let window = a.window.unwrap_or(a.ring.min(MAX_MARGINAL));
    let report = entropy_report(&model, &nu, a.rho, a.offset, window)?;
    sink.emit("entropy.json", &serde_json::to_string_pretty(&report)?)?;
    if a.measure == MeasureKind::File {
        return Ok(Status::Ok);
    }
    let worst_alpha = report.alpha.iter().map(|b| b.value).fold(0.0, f64::max);
    let bad = report.balance.total.abs() > a.tol || report.balance_residual > a.tol || worst_alpha > a.tol;
    Ok(if bad {
        Status::CheckFailed("stationary measure violates the entropy balance".into())
    } else {
        Status::Ok
    })
}
