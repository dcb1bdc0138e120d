use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use super::{RunManifest, Stage, StageRecord};
use crate::error::{Error, Result};

fn artifact(dir: &Path, rec: &StageRecord, name: &str) -> Result<Option<String>> {
    if !rec.artifacts.iter().any(|a| a == name) {
        return Ok(None);
    }
    let path = dir.join(name);
    std::fs::read_to_string(&path)
        .map(Some)
        .map_err(|e| Error::Report(format!("missing artifact {}: {e}", path.display())))
}

fn json_artifact(dir: &Path, rec: &StageRecord, name: &str) -> Result<Option<Value>> {
    artifact(dir, rec, name)?
        .map(|t| serde_json::from_str(&t).map_err(|e| Error::Report(format!("{name}: {e}"))))
        .transpose()
}

fn sci(v: &Value) -> String {
    v.as_f64().map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"))
}

fn fixed(v: &Value) -> String {
    v.as_f64().map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn cell_section(out: &mut String, v: &Value) {
    let _ = writeln!(out, "== cell: beta_hom samples ({} route, {} nodes) ==", v["route"].as_str().unwrap_or("?"), v["cell_nodes"]);
    let _ = writeln!(out, "{:>10} {:>12} {:>12} {:>12} {:>11}", "xi", "flux", "oracle", "coefficient", "|diff|");
    for r in v["rows"].as_array().into_iter().flatten() {
        let diff = match (r["flux"][0].as_f64(), r["oracle"].as_f64()) {
            (Some(f), Some(o)) => format!("{:.4e}", (f - o).abs()),
            _ => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:>10} {:>12} {:>12} {:>12} {:>11}",
            fixed(&r["xi"]),
            fixed(&r["flux"][0]),
            fixed(&r["oracle"]),
            fixed(&r["coefficient"]),
            diff
        );
    }
    if let Some(last) = v["rows"].as_array().and_then(|r| r.last()) {
        let _ = writeln!(out, "a_hom = {} (oracle {}, tolerance {})", fixed(&last["coefficient"]), fixed(&v["oracle"]), sci(&v["tolerance"]));
    }
}

fn tabulate_section(out: &mut String, v: &Value) {
    let _ = writeln!(out, "== tabulate: homogenized table ==");
    let _ = writeln!(
        out,
        "grid a: {} nodes on [-{}, {}]; b: {} nodes on [-{}, {}]; cell {} nodes",
        v["a_nodes"], v["a_radius"], v["a_radius"], v["b_nodes"], v["b_radius"], v["b_radius"], v["cell_nodes"]
    );
    let _ = writeln!(out, "max cell residual {} (tol {})", sci(&v["max_residual"]), sci(&v["tol_cell"]));
    let _ = writeln!(
        out,
        "selfduality gap {} (allowed {}), min L - <a,b> {}",
        sci(&v["gap"]["max_gap"]),
        sci(&v["gap_tolerance"]),
        sci(&v["gap"]["min_basic_margin"])
    );
    let b = &v["bounds"];
    if b.is_null() {
        let _ = writeln!(out, "bounds: no growth record");
    } else {
        let _ = writeln!(
            out,
            "bounds: lower margin {}, upper margin {}, mean margin {}, violations {} of {}",
            sci(&b["lower_margin"]),
            sci(&b["upper_margin"]),
            sci(&b["mean_margin"]),
            b["violations"].as_array().map_or(0, |a| a.len()),
            b["nodes_checked"]
        );
    }
    let _ = writeln!(out, "a_hom (table slope) = {}", fixed(&v["slope"]));
    for a in v["agreement"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "routes at xi = {}: cell {} table {} diff {}", fixed(&a["xi"]), fixed(&a["cell"]), fixed(&a["table"]), sci(&a["difference"]));
    }
}

fn solve_line(out: &mut String, label: &str, v: &Value) {
    let u_max = v["u"].as_array().map(|u| u.iter().filter_map(Value::as_f64).fold(f64::NEG_INFINITY, f64::max));
    let _ = writeln!(
        out,
        "{label}: eps {} nodes {} gap {} energy {} u_max {} iterations {}",
        fixed(&v["eps"]),
        v["mesh_nodes"],
        sci(&v["gap"]),
        fixed(&v["energy"]),
        u_max.map_or("-".into(), |x| format!("{x:.6}")),
        v["iterations"]
    );
}

/// Render the report of the run in `dir` from its manifest and artifacts.
/// No timings are included, so identical runs give identical text.
pub fn render_report(dir: &Path) -> Result<String> {
    let m = RunManifest::load(dir)?;
    let mut out = String::new();
    let _ = writeln!(out, "run: {}", if m.name.is_empty() { "(unnamed)" } else { &m.name });
    let _ = writeln!(out, "config: {}", m.config_hash);
    let _ = writeln!(out, "version: {}", m.version);
    let _ = writeln!(out, "seed: {}", m.seed);
    let _ = writeln!(out, "exit code: {}", m.exit_code);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<12} {}", "stage", "status");
    for s in &m.stages {
        let _ = writeln!(out, "{:<12} {}", s.stage.name(), s.status.label());
        if let Some(e) = &s.error {
            let _ = writeln!(out, "{:<12} {e}", "");
        }
    }
    for s in &m.stages {
        let mut section = String::new();
        match s.stage {
            Stage::Verify => {
                if let Some(v) = json_artifact(dir, s, "verify.json")? {
                    let _ = writeln!(section, "== verify ==");
                    let _ = writeln!(
                        section,
                        "growth: smallest slack {} over {} samples",
                        sci(&v["growth"]["min_basic_margin"]),
                        v["growth"]["nodes_checked"]
                    );
                }
            }
            Stage::Selfdualize => {
                if let Some(v) = json_artifact(dir, s, "selfdualize.json")? {
                    let _ = writeln!(section, "== selfdualize ({} nodes, radius {}) ==", v["nodes"], v["radius"]);
                    let _ = writeln!(section, "{:>6} {:>6} {:>11} {:>11} {:>11} {:>11}", "region", "pass", "max_gap", "sandwich_lo", "sandwich_hi", "graph_dev");
                    for r in v["regions"].as_array().into_iter().flatten() {
                        let _ = writeln!(
                            section,
                            "{:>6} {:>6} {:>11} {:>11} {:>11} {:>11}",
                            r["region"].to_string(),
                            r["passed"].to_string(),
                            sci(&r["max_gap"]),
                            sci(&r["sandwich_lower"]),
                            sci(&r["sandwich_upper"]),
                            sci(&r["graph_deviation"])
                        );
                    }
                }
            }
            Stage::Cell => {
                if let Some(v) = json_artifact(dir, s, "cell.json")? {
                    cell_section(&mut section, &v);
                }
            }
            Stage::Tabulate => {
                if let Some(v) = json_artifact(dir, s, "tabulate.json")? {
                    tabulate_section(&mut section, &v);
                }
            }
            Stage::Solve => {
                if let Some(v) = json_artifact(dir, s, "solve.json")? {
                    let _ = writeln!(section, "== solve ({}) ==", v["source"].as_str().unwrap_or("?"));
                    solve_line(&mut section, "oscillating", &v);
                }
                if let Some(v) = json_artifact(dir, s, "solve_hom.json")? {
                    solve_line(&mut section, "homogenized", &v);
                }
            }
            Stage::Sweep => {
                if let Some(csv) = artifact(dir, s, "sweep.csv")? {
                    let _ = writeln!(section, "== sweep ==");
                    section.push_str(&csv);
                }
                if let Some(v) = json_artifact(dir, s, "sweep.json")? {
                    let _ = writeln!(
                        section,
                        "rate err_u {} (pass {}), rate flux {} (pass {}), gaps certified {}",
                        fixed(&v["rate_u"]),
                        v["rate_u_passed"],
                        fixed(&v["rate_flux"]),
                        v["rate_flux_passed"],
                        v["gaps_certified"]
                    );
                    if let Some(r) = v["records"].as_array() {
                        let maxes: Vec<String> = r.iter().map(|x| fixed(&x["u_hom_max"])).collect();
                        let _ = writeln!(section, "u_hom max per eps: {}", maxes.join(" "));
                    }
                }
            }
            Stage::Checks => {
                if let Some(v) = json_artifact(dir, s, "checks.json")? {
                    let _ = writeln!(section, "== checks (seed {}) ==", v["seed"]);
                    for suite in v["suites"].as_array().into_iter().flatten() {
                        let _ = writeln!(
                            section,
                            "{:<24} cases {:>4} failures {:>3} worst ratio {}",
                            suite["name"].as_str().unwrap_or("?"),
                            suite["cases"].to_string(),
                            suite["failures"].to_string(),
                            sci(&suite["worst_ratio"])
                        );
                    }
                }
            }
        }
        if !section.is_empty() {
            let _ = writeln!(out);
            out.push_str(&section);
        }
    }
    Ok(out)
}

/// Render the report and write `report.txt` and `summary.csv` into `dir`.
pub fn write_report(dir: &Path) -> Result<String> {
    let text = render_report(dir)?;
    let m = RunManifest::load(dir)?;
    let mut csv = String::from("stage,status\n");
    for s in &m.stages {
        let _ = writeln!(csv, "{},{}", s.stage.name(), s.status.label());
    }
    std::fs::write(dir.join("report.txt"), &text)?;
    std::fs::write(dir.join("summary.csv"), csv)?;
    Ok(text)
}
