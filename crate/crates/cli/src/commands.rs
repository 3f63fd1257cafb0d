//! One handler per subcommand. Each writes its artifacts through a
//! [`Recorder`] and seals them with a manifest.

use std::fmt::Display;

use finconn_core::experiments::{
    estimate_g, estimate_g_until, estimate_tau, fit_mass_gap, fit_prefactor, FiniteConnectionEstimate, GPoint,
};
use finconn_core::perc::dump::write_config;
use finconn_core::perc::oracle::finite_connection_polynomial;
use finconn_core::perc::{finite_connection, mass_gap_stats, BondRng, ConeParams, Explorer, LatticeBox, LatticeConfig};
use finconn_core::renewal::{
    check_renewal_limit, chi, chi_bracket, ladder_height_law, tilt_continuity, RenewalConfig, RenewalTable,
};
use finconn_core::steplaw::{resolve_law, AnyLaw, BoundaryKind, BoundaryLaw, StepLaw1D, StepLaw3D, TiltParams};
use finconn_core::theorems::{check_apriori_suite, check_theorem_b, check_theorem_c, check_zn_theorem};
use finconn_core::walk1d::{walk_table, WalkKind, WalkTable, WindowSpec};
use finconn_core::walk3d::{compose_boundary, fixed_horizon_sum, p_table, r_table, CoupledTable, WindowSpec3};
use finconn_core::weight::{Rational, Weight};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, AUTO_EXACT_MAX_N};
use crate::manifest::Recorder;
use crate::{criteria, Command, Failure, FitCmd, OracleCmd, PercCmd, RenewalCmd, TheoremCmd, WalkCmd};

pub fn dispatch(cmd: Command, mut cfg: Config, argv: Vec<String>) -> Result<(), Failure> {
    let mut rec = Recorder::new(&cfg.out)?;
    let stem = match cmd {
        Command::Walk { table, opts } => {
            let w = &mut cfg.walk;
            set(&mut w.law, opts.law.map(Some));
            set(&mut w.n, opts.n);
            set(&mut w.start, opts.start);
            set(&mut w.start3, opts.start3.map(|v| [v[0], v[1]]));
            set(&mut w.exact, opts.exact.map(Some));
            set(&mut w.window, opts.window.map(|v| Some([v[0], v[1]])));
            set(&mut w.leak_bound, opts.leak_bound);
            set(&mut w.boundary_b, opts.boundary_b.map(Some));
            set(&mut w.boundary_f, opts.boundary_f.map(Some));
            walk(table, &cfg, &mut rec)?
        }
        Command::Renewal { what, opts } => {
            let r = &mut cfg.renewal;
            set(&mut r.law, opts.law);
            set(&mut r.z_max, opts.z_max);
            set(&mut r.chi_horizon, opts.chi_horizon.map(Some));
            set(&mut r.chi_depth, opts.chi_depth);
            renewal(what, &cfg, &mut rec)?
        }
        Command::Theorem { which, opts } => {
            let t = &mut cfg.theorem;
            set(&mut t.law, opts.law.map(Some));
            set(&mut t.n, opts.n.map(Some));
            set(&mut t.stride, opts.stride.map(Some));
            set(&mut t.tol, opts.tol.map(Some));
            theorem(which, &cfg, &mut rec)?
        }
        Command::Perc { what, opts } => {
            let p = &mut cfg.perc;
            set(&mut p.p, opts.p);
            if !opts.n.is_empty() {
                p.n = opts.n;
            }
            set(&mut p.samples, opts.samples);
            set(&mut p.margin, opts.margin.map(Some));
            set(&mut p.target_hits, opts.target_hits.map(Some));
            set(&mut p.max_samples, opts.max_samples);
            set(&mut p.tau_window, opts.window.map(|v| [v[0], v[1]]));
            p.dump |= opts.dump;
            perc(what, &cfg, &mut rec)?
        }
        Command::Fit { what: FitCmd::Prefactor, opts } => {
            let f = &mut cfg.fit;
            set(&mut f.series, opts.series.map(Some));
            set(&mut f.tau, opts.tau.map(Some));
            set(&mut f.tau_value, opts.tau_value.map(Some));
            set(&mut f.tau_stderr, opts.tau_stderr.map(Some));
            prefactor(&cfg, &mut rec)?
        }
        Command::Oracle { what: OracleCmd::Enumerate, opts } => {
            let o = &mut cfg.oracle;
            set(&mut o.n, opts.n);
            set(&mut o.p, opts.p);
            set(&mut o.mc_samples, opts.mc_samples);
            oracle(&cfg, &mut rec)?
        }
        Command::Check { criteria } => check(&criteria, &cfg, &mut rec)?,
    };
    let (stem, verdict) = stem;
    rec.finish(&stem, argv, &cfg)?;
    match verdict {
        Some(msg) => Err(Failure::Validation(msg)),
        None => Ok(()),
    }
}

/// Artifact stem, plus a message when the run produced a failing verdict.
type Outcome = (String, Option<String>);

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn law1(spec: &str) -> Result<StepLaw1D, Failure> {
    match resolve_law(spec)? {
        AnyLaw::OneD(l) => Ok(l),
        _ => Err(Failure::Validation(format!("`{spec}` is not a one-dimensional law"))),
    }
}

fn law3(spec: &str) -> Result<StepLaw3D, Failure> {
    match resolve_law(spec)? {
        AnyLaw::ThreeD(l) => Ok(l),
        _ => Err(Failure::Validation(format!("`{spec}` is not a coupled-step law"))),
    }
}

fn boundary(spec: Option<&str>, kind: BoundaryKind) -> Result<Option<BoundaryLaw>, Failure> {
    match spec {
        None => Ok(None),
        Some("identity") => Ok(Some(BoundaryLaw::identity(kind))),
        Some(s) => match resolve_law(s)? {
            AnyLaw::Boundary(b) => Ok(Some(b)),
            _ => Err(Failure::Validation(format!("`{s}` is not a boundary law"))),
        },
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> finconn_core::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn verdict(passed: bool, what: &str) -> Option<String> {
    (!passed).then(|| format!("{what} failed its tolerance"))
}

/// Table CSV with values printed in the weight's own notation.
fn walk_csv<W: Weight + Display>(t: &WalkTable<W>) -> String {
    let mut s = format!("# law={},kind={},window=[{};{}],leak={:e}\nk,z,value\n", t.law, t.kind.as_str(), t.z_min, t.z_max, t.leak);
    for k in 0..=t.n {
        for (i, v) in t.row(k).iter().enumerate() {
            if !v.is_zero() {
                s += &format!("{k},{},{v}\n", t.z_min + i as i64);
            }
        }
    }
    s
}

fn coupled_csv<W: Weight + Display>(t: &CoupledTable<W>) -> String {
    let mut s = String::from("t,v,x,value\n");
    for (a, v, x, val) in t.entries() {
        s += &format!("{a},{v},{x},{val}\n");
    }
    s
}

#[derive(Serialize)]
struct TableMeta<'a> {
    table: &'a str,
    law: &'a str,
    n: usize,
    exact: bool,
    leak: f64,
    window: serde_json::Value,
}

fn walk(table: WalkCmd, cfg: &Config, rec: &mut Recorder) -> Result<Outcome, Failure> {
    let w = &cfg.walk;
    let name = format!("walk_{}", format!("{table:?}").to_lowercase());
    let spec = match w.window {
        Some([lo, hi]) => WindowSpec { leak_bound: w.leak_bound, ..WindowSpec::explicit(lo, hi) },
        None => WindowSpec { leak_bound: w.leak_bound, ..WindowSpec::default() },
    };
    match table {
        WalkCmd::Q | WalkCmd::U | WalkCmd::U0 => {
            let law = law1(w.law.as_deref().unwrap_or("srw"))?;
            rec.law(&law);
            let (kind, start) = match table {
                WalkCmd::Q => (WalkKind::Free, 0),
                WalkCmd::U => (WalkKind::StrictPositive, w.start),
                _ => (WalkKind::WeakNonnegative, 0),
            };
            let exact = w.exact.unwrap_or(law.has_exact() && w.n <= AUTO_EXACT_MAX_N);
            let (csv, leak, window) = if exact {
                let t = walk_table::<Rational>(&law, kind, w.n, start, &spec)?;
                (walk_csv(&t), t.leak, [t.z_min, t.z_max])
            } else {
                let t = walk_table::<f64>(&law, kind, w.n, start, &spec)?;
                (String::from_utf8_lossy(&csv_bytes(|b| t.write_csv(b))?).into_owned(), t.leak, [t.z_min, t.z_max])
            };
            rec.write_bytes(&format!("{name}.csv"), csv.as_bytes())?;
            let meta = TableMeta { table: &name, law: &law.name, n: w.n, exact, leak, window: serde_json::json!(window) };
            rec.write_json(&format!("{name}.json"), &meta)?;
        }
        WalkCmd::R | WalkCmd::P => {
            let law = law3(w.law.as_deref().unwrap_or("uniform3"))?;
            rec.law(&law);
            let start = (w.start3[0], w.start3[1]);
            let q_b = boundary(w.boundary_b.as_deref(), BoundaryKind::Initial)?;
            let q_f = boundary(w.boundary_f.as_deref(), BoundaryKind::Terminal)?;
            if let Some(b) = &q_b {
                rec.law(b);
            }
            if let Some(b) = &q_f {
                rec.law(b);
            }
            let exact = w.exact.unwrap_or(false);
            let bounded = q_b.is_some() || q_f.is_some();
            let (csv, leak, window) = if exact {
                let t = match (table, bounded) {
                    (WalkCmd::P, _) => p_table::<Rational>(&law, w.n, start)?,
                    (_, false) => r_table::<Rational>(&law, w.n, start)?,
                    _ => compose_boundary::<Rational>(&law, w.n, start, q_b.as_ref(), q_f.as_ref())?,
                };
                (coupled_csv(&t), t.leak, serde_json::to_value(t.window).unwrap_or_default())
            } else {
                let t = match (table, bounded) {
                    (WalkCmd::P, _) => p_table::<f64>(&law, w.n, start)?,
                    (_, false) => r_table::<f64>(&law, w.n, start)?,
                    _ => compose_boundary::<f64>(&law, w.n, start, q_b.as_ref(), q_f.as_ref())?,
                };
                let csv = String::from_utf8_lossy(&csv_bytes(|b| t.write_csv(b))?).into_owned();
                (csv, t.leak, serde_json::to_value(t.window).unwrap_or_default())
            };
            rec.write_bytes(&format!("{name}.csv"), csv.as_bytes())?;
            let meta = TableMeta { table: &name, law: &law.name, n: w.n, exact, leak, window };
            rec.write_json(&format!("{name}.json"), &meta)?;
        }
        WalkCmd::Sum => {
            let law = law3(w.law.as_deref().unwrap_or("uniform3"))?;
            rec.law(&law);
            let q_b = boundary(w.boundary_b.as_deref(), BoundaryKind::Initial)?
                .unwrap_or_else(|| BoundaryLaw::identity(BoundaryKind::Initial));
            let q_f = boundary(w.boundary_f.as_deref(), BoundaryKind::Terminal)?
                .unwrap_or_else(|| BoundaryLaw::identity(BoundaryKind::Terminal));
            rec.law(&q_b);
            rec.law(&q_f);
            let ends: Vec<(i64, i64)> = w.ends.iter().map(|e| (e[0], e[1])).collect();
            let spec3 = WindowSpec3 { leak_bound: w.leak_bound, ..WindowSpec3::default() };
            let fh = fixed_horizon_sum(&law, &q_b, &q_f, w.n, (w.start3[0], w.start3[1]), &ends, &spec3)?;
            let mut csv = String::from("N,u,y,value\n");
            for (n, row) in fh.values.iter().enumerate() {
                for (e, v) in ends.iter().zip(row) {
                    csv += &format!("{n},{},{},{v:e}\n", e.0, e.1);
                }
            }
            rec.write_bytes("walk_sum.csv", csv.as_bytes())?;
            rec.write_json("walk_sum.json", &fh)?;
        }
    }
    Ok((name, None))
}

#[derive(Serialize)]
struct RenewalSummary<'a> {
    law: &'a str,
    z: Vec<usize>,
    #[serde(rename = "U")]
    big_u: &'a [f64],
    chi: f64,
    chi_bracket: Option<(f64, f64)>,
}

fn renewal(what: RenewalCmd, cfg: &Config, rec: &mut Recorder) -> Result<Outcome, Failure> {
    let r = &cfg.renewal;
    let rc = RenewalConfig { z_max: r.z_max, convention: r.chi_convention, chi_horizon: r.chi_horizon, chi_depth: r.chi_depth };
    let stem = match what {
        RenewalCmd::F => {
            let law = law1(&r.law)?;
            rec.law(&law);
            let lh = ladder_height_law(&law);
            let mut csv = String::from("z,f\n");
            for (z, f) in lh.f.iter().enumerate().take(r.z_max + 1) {
                csv += &format!("{z},{f:e}\n");
            }
            rec.write_bytes("renewal_f.csv", csv.as_bytes())?;
            rec.write_json("renewal_f.json", &lh)?;
            "renewal_f"
        }
        RenewalCmd::BigU => {
            let law = law1(&r.law)?;
            rec.law(&law);
            let t = RenewalTable::build(&law, &rc);
            rec.write_bytes("renewal_U.csv", &csv_bytes(|b| t.write_csv(b))?)?;
            let s = RenewalSummary {
                law: &law.name,
                z: (1..=r.z_max).collect(),
                big_u: &t.big_u[1..],
                chi: t.chi,
                chi_bracket: t.chi_bracket,
            };
            rec.write_json("renewal_U.json", &s)?;
            "renewal_U"
        }
        RenewalCmd::Chi => {
            let law = law1(&r.law)?;
            rec.law(&law);
            let c = chi(&law, r.chi_convention);
            let bracket = r.chi_horizon.map(|m| chi_bracket(&law, m, r.chi_depth, r.chi_convention));
            rec.write_json("renewal_chi.json", &serde_json::json!({"law": law.name, "chi": c, "bracket": bracket}))?;
            "renewal_chi"
        }
        RenewalCmd::Limit => {
            let law = law1(&r.law)?;
            rec.law(&law);
            let rows = check_renewal_limit(&ladder_height_law(&law).f, r.z_max, &r.r0s);
            rec.write_json("renewal_limit.json", &rows)?;
            "renewal_limit"
        }
        RenewalCmd::TiltScan => {
            let law = law3(&r.tilt_law)?;
            rec.law(&law);
            let [a, b] = r.tilt_direction;
            let len = a.hypot(b);
            if len == 0.0 {
                return Err(Failure::Validation("tilt_direction must be nonzero".into()));
            }
            let grid: Vec<TiltParams> = r.tilt_norms.iter().map(|&s| TiltParams::new(s * a / len, s * b / len)).collect();
            let scan = tilt_continuity(&law, &grid, r.z_max, r.chi_convention);
            rec.write_json("renewal_tilt_scan.json", &scan)?;
            "renewal_tilt_scan"
        }
    };
    Ok((stem.into(), None))
}

fn theorem(which: TheoremCmd, cfg: &Config, rec: &mut Recorder) -> Result<Outcome, Failure> {
    let t = &cfg.theorem;
    match which {
        TheoremCmd::Zn => {
            let law = law1(t.law.as_deref().unwrap_or("srw"))?;
            rec.law(&law);
            let points: Vec<(i64, i64)> = t.points.iter().map(|p| (p[0], p[1])).collect();
            let r = check_zn_theorem(&law, t.n.unwrap_or(2000), &points, t.stride.unwrap_or(25), t.tol.unwrap_or(0.05))?;
            rec.write_json("theorem_zn.json", &r)?;
            Ok(("theorem_zn".into(), verdict(r.passed(), "local limit")))
        }
        TheoremCmd::C => {
            let law = law3(t.law.as_deref().unwrap_or("uniform3"))?;
            rec.law(&law);
            let r = check_theorem_c(
                &law,
                t.n.unwrap_or(1000),
                &t.start_gaps,
                &t.end_gaps,
                &t.offsets,
                t.stride.unwrap_or(10),
                t.tol.unwrap_or(0.08),
            )?;
            rec.write_json("theorem_C.json", &r)?;
            Ok(("theorem_C".into(), verdict(r.passed(), "coupled-walk ratio")))
        }
        TheoremCmd::B => {
            let law = law3(t.law.as_deref().unwrap_or("uniform3"))?;
            rec.law(&law);
            let q_b = boundary(t.boundary_b.as_deref(), BoundaryKind::Initial)?
                .unwrap_or_else(|| BoundaryLaw::identity(BoundaryKind::Initial));
            let q_f = boundary(t.boundary_f.as_deref(), BoundaryKind::Terminal)?
                .unwrap_or_else(|| BoundaryLaw::identity(BoundaryKind::Terminal));
            rec.law(&q_b);
            rec.law(&q_f);
            let gaps: Vec<(i64, i64)> = t.gap_pairs.iter().map(|g| (g[0], g[1])).collect();
            let r = check_theorem_b(&law, &q_b, &q_f, t.n.unwrap_or(400), &gaps, t.stride.unwrap_or(5), t.tol.unwrap_or(0.08))?;
            rec.write_json("theorem_B.json", &r)?;
            Ok(("theorem_B".into(), verdict(r.report.passed() && r.symmetry_dev <= 1e-12, "fixed-horizon sum")))
        }
        TheoremCmd::Apriori => {
            let l1 = t.laws1d.iter().map(|s| law1(s)).collect::<Result<Vec<_>, _>>()?;
            let l3 = t.laws3d.iter().map(|s| law3(s)).collect::<Result<Vec<_>, _>>()?;
            l1.iter().for_each(|l| rec.law(l));
            l3.iter().for_each(|l| rec.law(l));
            let r = check_apriori_suite(&l1, &l3, t.n1, t.n3)?;
            rec.write_json("theorem_apriori.json", &r)?;
            Ok(("theorem_apriori".into(), verdict(r.all_hold(), "a-priori bounds")))
        }
    }
}

fn first_n(cfg: &Config) -> Result<i64, Failure> {
    cfg.perc.n.first().copied().ok_or_else(|| Failure::Validation("perc.n is empty".into()))
}

fn perc(what: PercCmd, cfg: &Config, rec: &mut Recorder) -> Result<Outcome, Failure> {
    let pc = &cfg.perc;
    let seed = cfg.seed;
    match what {
        PercCmd::Sample => {
            let n = first_n(cfg)?;
            let bx = LatticeBox::for_connection(n, pc.margin.unwrap_or(n.max(4)))?;
            let rows: Vec<(u64, f64, bool)> = (0..pc.samples)
                .into_par_iter()
                .map(|s| {
                    let c = LatticeConfig::sample(pc.p, bx, seed, s);
                    Ok((s, c.open_fraction(), finite_connection(&c, n)?))
                })
                .collect::<finconn_core::Result<_>>()?;
            let mut csv = String::from("stream,open_fraction,finite_connection\n");
            for (s, f, h) in &rows {
                csv += &format!("{s},{f},{}\n", *h as u8);
            }
            rec.write_bytes("perc_sample.csv", csv.as_bytes())?;
            if pc.dump {
                let mut buf = Vec::new();
                for s in 0..pc.samples {
                    write_config(&mut buf, &LatticeConfig::sample(pc.p, bx, seed, s))?;
                }
                rec.write_bytes("samples.fcpd", &buf)?;
            }
            let hits = rows.iter().filter(|r| r.2).count();
            rec.write_json(
                "perc_sample.json",
                &serde_json::json!({"p": pc.p, "N": n, "box": bx, "seed": seed, "samples": pc.samples, "hits": hits}),
            )?;
            Ok(("perc_sample".into(), None))
        }
        PercCmd::Tau => {
            let [lo, hi] = pc.tau_window;
            let est = estimate_tau(pc.p, (lo, hi), pc.samples, seed, pc.margin.unwrap_or(hi + 8))?;
            let mut csv = String::from("N,hits,log_p,stderr\n");
            for pt in &est.points {
                csv += &format!("{},{},{:e},{:e}\n", pt.n, pt.hits, pt.log_p, pt.stderr);
            }
            rec.write_bytes("perc_tau.csv", csv.as_bytes())?;
            rec.write_json("perc_tau.json", &est)?;
            Ok(("perc_tau".into(), None))
        }
        PercCmd::G => {
            let series = pc
                .n
                .iter()
                .map(|&n| match pc.target_hits {
                    Some(t) => estimate_g_until(pc.p, n, t, pc.batch, pc.max_samples, seed, pc.margin),
                    None => estimate_g(pc.p, n, pc.samples, seed, pc.margin),
                })
                .collect::<Result<Vec<FiniteConnectionEstimate>, _>>()?;
            rec.write_json("perc_g.json", &series)?;
            Ok(("perc_g".into(), None))
        }
        PercCmd::Geometry => {
            let n = first_n(cfg)?;
            let cone = ConeParams::new(pc.cone[0], pc.cone[1])?;
            let stats = mass_gap_stats(pc.p, cone, n, pc.samples, seed)?;
            let mut csv = String::from("g,count,tail\n");
            for (g, (c, t)) in stats.histogram.iter().zip(&stats.tail).enumerate() {
                csv += &format!("{g},{c},{t:e}\n");
            }
            rec.write_bytes("perc_geometry.csv", csv.as_bytes())?;
            let [lo, hi] = pc.gap_range;
            let fit = fit_mass_gap(&stats, lo, hi, pc.concavity_z).ok();
            rec.write_json("perc_geometry.json", &serde_json::json!({"stats": stats, "fit": fit}))?;
            Ok(("perc_geometry".into(), None))
        }
    }
}

fn read_json(path: &std::path::Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Resource(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn prefactor(cfg: &Config, rec: &mut Recorder) -> Result<Outcome, Failure> {
    let f = &cfg.fit;
    let path = f.series.as_ref().ok_or_else(|| Failure::Validation("fit prefactor needs a g series".into()))?;
    let raw: Vec<FiniteConnectionEstimate> = serde_json::from_value(read_json(path)?)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let short = raw.iter().any(|e| e.n > f.truncate_to && e.insufficient_hits);
    let series: Vec<GPoint> = raw.iter().filter(|e| !short || e.n <= f.truncate_to).map(GPoint::from).collect();
    let (tau, tau_se) = match (&f.tau, f.tau_value) {
        (_, Some(v)) => (v, f.tau_stderr.unwrap_or(0.0)),
        (Some(p), None) => {
            let v = read_json(p)?;
            match (v["tau_hat"].as_f64(), v["stderr"].as_f64()) {
                (Some(t), Some(s)) => (t, s),
                _ => return Err(Failure::Validation(format!("{}: no tau_hat/stderr", p.display()))),
            }
        }
        (None, None) => return Err(Failure::Validation("fit prefactor needs tau or tau_value".into())),
    };
    let fit = fit_prefactor(&series, tau, tau_se)?;
    rec.write_json("fit_prefactor.json", &serde_json::json!({"truncated": short, "fit": fit}))?;
    Ok(("fit_prefactor".into(), None))
}

fn oracle(cfg: &Config, rec: &mut Recorder) -> Result<Outcome, Failure> {
    let o = &cfg.oracle;
    let bx = LatticeBox::minimal(o.n);
    let poly = finite_connection_polynomial(bx, o.n)?;
    let exact = poly.prob(o.p);
    let mc = (o.mc_samples > 0).then(|| {
        let hits: u64 = (0..o.mc_samples)
            .into_par_iter()
            .map_init(|| Explorer::new(bx), |ex, s| ex.dual_from_origin(&BondRng::new(cfg.seed, s, o.p), o.n).finite_connection() as u64)
            .sum();
        let est = hits as f64 / o.mc_samples as f64;
        let se = (exact * (1.0 - exact) / o.mc_samples as f64).sqrt();
        serde_json::json!({"samples": o.mc_samples, "hits": hits, "estimate": est, "z": (est - exact) / se})
    });
    rec.write_json("oracle_enumerate.json", &serde_json::json!({"polynomial": poly, "p": o.p, "prob": exact, "monte_carlo": mc}))?;
    Ok(("oracle_enumerate".into(), None))
}

fn check(ids: &[u8], cfg: &Config, rec: &mut Recorder) -> Result<Outcome, Failure> {
    let ids: Vec<u8> = if ids.is_empty() { criteria::ALL.to_vec() } else { ids.to_vec() };
    let mut failed = Vec::new();
    for &id in &ids {
        let r = criteria::run(id, cfg.seed)?;
        println!("{}", r.line());
        rec.write_json(&format!("criterion_{id}.json"), &r)?;
        if !r.passed {
            failed.push(id);
        }
    }
    let stem = match ids.as_slice() {
        [one] => format!("check_{one}"),
        _ => "check".to_string(),
    };
    let msg = (!failed.is_empty()).then(|| format!("criteria {failed:?} failed"));
    Ok((stem, msg))
}
