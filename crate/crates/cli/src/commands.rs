//! Subcommand implementations.

use crate::manifest::RunManifest;
use crate::plot;
use pwc_core::config::RunConfig;
use pwc_core::data::load_station_csv;
use pwc_core::fem::assemble_fem;
use pwc_core::mcmc::chain::{fmt_f64, quantile_sorted};
use pwc_core::mesh::Mesh;
use pwc_core::pipeline::{
    cross_validate, fit_association, fit_margins, AssocModel, Dataset, FitConfig, FittedMargins,
    FittedModel, SpatialContext,
};
use pwc_core::score::{cv_folds, dic, waic};
use pwc_core::sim::{kappa_covariates_at_nodes, simulate_scenario};
use pwc_core::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Predictive draws behind the arrow-map summaries.
const PREDICTION_DRAWS: usize = 100;

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(dir: &Path, name: &str, text: &str, manifest: &mut RunManifest) -> Result<()> {
    std::fs::write(dir.join(name), text)?;
    manifest.record(name);
    Ok(())
}

fn mesh_from_config(cfg: &RunConfig) -> Result<Mesh> {
    match &cfg.mesh.path {
        Some(p) => Mesh::load(Path::new(p)),
        None => Mesh::regular(cfg.mesh.resolution, cfg.mesh.padding),
    }
}

fn context_from_config(cfg: &RunConfig, mesh: Mesh, seed: u64) -> Result<SpatialContext> {
    let zk = if cfg.model.nonstationary {
        kappa_covariates_at_nodes(&mesh)
    } else {
        vec![vec![]; mesh.nodes.len()]
    };
    SpatialContext::new(mesh, zk, cfg.mcmc.calibration_draws, seed)
}

pub fn cmd_simulate(
    cfg: &RunConfig,
    out: &Path,
    seed: u64,
    replications: usize,
) -> Result<()> {
    ensure_out(out)?;
    let mut manifest = RunManifest::new("simulate", &cfg.to_toml(), seed);
    let mesh = mesh_from_config(cfg)?;
    let fem = assemble_fem(&mesh)?;
    let scenario = cfg.scenario.scenario()?;
    for r in 0..replications {
        let data = simulate_scenario(&scenario, &mesh, &fem, seed + r as u64)?;
        let mut csv = String::from("x,y,direction,speed,z,zr\n");
        for i in 0..data.phi.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_f64(data.sites[i][0]),
                fmt_f64(data.sites[i][1]),
                fmt_f64(data.phi[i]),
                fmt_f64(data.y[i]),
                fmt_f64(data.z_beta[i]),
                fmt_f64(data.z_rho[i]),
            );
        }
        write_file(out, &format!("dataset_{r}.csv"), &csv, &mut manifest)?;

        let mut truth = String::from("eta,unwrapped,winding\n");
        for i in 0..data.phi.len() {
            let _ = writeln!(
                truth,
                "{},{},{}",
                fmt_f64(data.truth.eta[i]),
                fmt_f64(data.truth.unwrapped[i]),
                data.truth.windings[i],
            );
        }
        write_file(out, &format!("truth_{r}.csv"), &truth, &mut manifest)?;

        let mut nodes = String::from("gamma_ang,gamma_lin\n");
        for i in 0..data.truth.gamma_ang.len() {
            let _ = writeln!(
                nodes,
                "{},{}",
                fmt_f64(data.truth.gamma_ang[i]),
                fmt_f64(data.truth.gamma_lin[i]),
            );
        }
        write_file(out, &format!("truth_nodes_{r}.csv"), &nodes, &mut manifest)?;
    }
    manifest.write(out)?;
    eprintln!(
        "simulate: wrote {replications} replication(s) to {}",
        out.display()
    );
    Ok(())
}

fn load_dataset(cfg: &RunConfig, data_path: Option<&Path>) -> Result<(PathBuf, Dataset)> {
    let path: PathBuf = match data_path {
        Some(p) => p.to_path_buf(),
        None => cfg
            .data
            .path
            .as_ref()
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config("no dataset: pass --data or set data.path".into()))?,
    };
    let loaded = load_station_csv(&path, &cfg.data.columns)?;
    Ok((path, loaded.dataset))
}

/// Fit one association model on top of shared margins and append its
/// information criteria to the stats table.
fn fit_and_stats(
    dataset: &Dataset,
    ctx: &SpatialContext,
    margins: &FittedMargins,
    assoc: AssocModel,
    fit_cfg: &FitConfig,
    seed: u64,
) -> Result<(FittedModel, String)> {
    let model = fit_association(dataset, ctx, margins, assoc, fit_cfg, seed)?;
    let (ll, ll_mean) = pwc_core::pipeline::selection_loglik(dataset, ctx, margins, &model)?;
    let d = dic(&ll, &ll_mean)?;
    let w = waic(&ll)?;
    let row = format!(
        "{},{},{},{},{}\n",
        model.assoc.label(),
        fmt_f64(d.dic),
        fmt_f64(w.waic),
        fmt_f64(d.p_d),
        fmt_f64(w.p_waic),
    );
    Ok((model, row))
}

pub fn cmd_fit(
    cfg: &RunConfig,
    data_path: Option<&Path>,
    out: &Path,
    seed: u64,
    snap_outside: bool,
) -> Result<()> {
    ensure_out(out)?;
    let (path, dataset) = load_dataset(cfg, data_path)?;
    let mut manifest =
        RunManifest::new("fit", &cfg.to_toml(), seed).with_data_file(&path)?;
    let assoc = cfg.model.assoc_model()?;
    manifest.model = Some(assoc.label());

    let ctx = context_from_config(cfg, mesh_from_config(cfg)?, seed)?;
    let fit_cfg = cfg.mcmc.fit_config();
    let margins = fit_margins(&dataset, &ctx, &fit_cfg, seed)?;
    let (model, stats_row) = fit_and_stats(&dataset, &ctx, &margins, assoc, &fit_cfg, seed)?;

    // chains and posterior summaries
    margins.ang_fit.chain.write_scalars_csv(&out.join("ang_chain.csv"))?;
    manifest.record("ang_chain.csv");
    margins.ang_fit.chain.write_summary_csv(&out.join("ang_summary.csv"))?;
    manifest.record("ang_summary.csv");
    margins.lin_fit.chain.write_scalars_csv(&out.join("lin_chain.csv"))?;
    manifest.record("lin_chain.csv");
    margins.lin_fit.chain.write_summary_csv(&out.join("lin_summary.csv"))?;
    manifest.record("lin_summary.csv");
    if let Some(cop) = &model.copula_fit {
        cop.chain.write_scalars_csv(&out.join("copula_chain.csv"))?;
        manifest.record("copula_chain.csv");
        cop.chain.write_summary_csv(&out.join("copula_summary.csv"))?;
        manifest.record("copula_summary.csv");
    }

    let stats = format!("model,dic,waic,p_dic,p_waic\n{stats_row}");
    write_file(out, "fit_stats.csv", &stats, &mut manifest)?;

    // posterior-mean association surface at the observation sites
    if let Some(cop) = &model.copula_fit {
        let p = if model.assoc.uses_covariates() {
            dataset.z_rho.first().map_or(0, Vec::len)
        } else {
            0
        };
        let beta = cop.beta_mean(p + 1)?;
        let mut surf = String::from("x,y,eta,rho\n");
        for i in 0..dataset.n_obs() {
            let mut eta = beta[0];
            for j in 0..p {
                eta += beta[j + 1] * dataset.z_rho[i][j];
            }
            let rho = cop.spec.link_to_rho(eta);
            let _ = writeln!(
                surf,
                "{},{},{},{}",
                fmt_f64(dataset.sites[i][0]),
                fmt_f64(dataset.sites[i][1]),
                fmt_f64(eta),
                fmt_f64(rho),
            );
        }
        write_file(out, "rho_surface.csv", &surf, &mut manifest)?;
    }

    // predictive summaries per site for the arrow map
    let draws = pwc_core::pipeline::predictive_draws(
        &ctx,
        &margins,
        &model,
        &dataset.sites,
        &dataset.z_ang,
        &dataset.z_lin,
        &dataset.z_rho,
        PREDICTION_DRAWS,
        seed + 7777,
        snap_outside,
    )?;
    let mut pred = String::from("x,y,dir_mean,speed_q10,speed_q50,speed_q90\n");
    for (i, site_draws) in draws.iter().enumerate() {
        let (mut c, mut s) = (0.0, 0.0);
        let mut speeds: Vec<f64> = Vec::with_capacity(site_draws.len());
        for &(phi, y) in site_draws {
            c += phi.cos();
            s += phi.sin();
            speeds.push(y);
        }
        speeds.sort_by(|a, b| a.total_cmp(b));
        let _ = writeln!(
            pred,
            "{},{},{},{},{},{}",
            fmt_f64(dataset.sites[i][0]),
            fmt_f64(dataset.sites[i][1]),
            fmt_f64(s.atan2(c)),
            fmt_f64(quantile_sorted(&speeds, 0.10)),
            fmt_f64(quantile_sorted(&speeds, 0.50)),
            fmt_f64(quantile_sorted(&speeds, 0.90)),
        );
    }
    write_file(out, "predictions.csv", &pred, &mut manifest)?;

    manifest.write(out)?;
    eprintln!("fit: model {} written to {}", model.assoc.label(), out.display());
    Ok(())
}

/// Read one fit directory's stats row and data fingerprint.
fn read_fit_output(dir: &Path) -> Result<(String, f64, f64, String)> {
    let manifest = RunManifest::load(dir)?;
    let fp = manifest
        .data_fingerprint
        .ok_or_else(|| Error::Data(format!("{}: fit manifest has no data fingerprint", dir.display())))?;
    let stats = std::fs::read_to_string(dir.join("fit_stats.csv"))
        .map_err(|e| Error::Data(format!("{}: missing fit_stats.csv: {e}", dir.display())))?;
    let line = stats
        .lines()
        .nth(1)
        .ok_or_else(|| Error::Data(format!("{}: empty fit_stats.csv", dir.display())))?;
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() < 3 {
        return Err(Error::Data(format!("{}: malformed fit_stats.csv", dir.display())));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Data(format!("{}: bad criterion value {s}: {e}", dir.display())))
    };
    Ok((fields[0].to_string(), parse(fields[1])?, parse(fields[2])?, fp))
}

pub fn cmd_select(fit_dirs: &[PathBuf], out: &Path) -> Result<()> {
    if fit_dirs.is_empty() {
        return Err(Error::Config("select needs at least one --fit directory".into()));
    }
    ensure_out(out)?;
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let mut fingerprint: Option<String> = None;
    for dir in fit_dirs {
        let (label, dic_v, waic_v, fp) = read_fit_output(dir)?;
        match &fingerprint {
            None => fingerprint = Some(fp),
            Some(existing) if *existing != fp => {
                return Err(Error::Data(format!(
                    "{}: fitted to a different dataset than the first fit",
                    dir.display()
                )))
            }
            _ => {}
        }
        rows.push((label, dic_v, waic_v));
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    let compare = rows.len() > 1;
    let mut csv = String::from("model,dic,waic,best\n");
    for (i, (label, d, w)) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{label},{},{},{}",
            fmt_f64(*d),
            fmt_f64(*w),
            if compare && i == 0 { "yes" } else { "" }
        );
    }
    let mut manifest = RunManifest::new("select", "", 0);
    manifest.data_fingerprint = fingerprint;
    write_file(out, "selection.csv", &csv, &mut manifest)?;
    manifest.write(out)?;
    if compare {
        eprintln!("select: best model by DIC is {}", rows[0].0);
    }
    Ok(())
}

pub fn cmd_score(
    cfg: &RunConfig,
    data_path: Option<&Path>,
    out: &Path,
    seed: u64,
) -> Result<()> {
    ensure_out(out)?;
    let (path, dataset) = load_dataset(cfg, data_path)?;
    let mut manifest =
        RunManifest::new("score", &cfg.to_toml(), seed).with_data_file(&path)?;
    let assoc = cfg.model.assoc_model()?;
    let mut models = vec![assoc];
    if assoc != AssocModel::Independence {
        models.push(AssocModel::Independence);
    }
    let ctx = context_from_config(cfg, mesh_from_config(cfg)?, seed)?;
    let fit_cfg = cfg.mcmc.fit_config();
    let scores = cross_validate(
        &dataset,
        &ctx,
        &models,
        cfg.cv_folds,
        &fit_cfg,
        seed,
        cfg.pred_draws,
    )?;

    let mut csv = String::from("model,metric,value\n");
    for s in &scores {
        let _ = writeln!(csv, "{},neg_log_score,{}", s.label, fmt_f64(s.neg_log_score));
        let _ = writeln!(csv, "{},energy_score,{}", s.label, fmt_f64(s.energy_score));
        let _ = writeln!(csv, "{},crps_cyl,{}", s.label, fmt_f64(s.crps_cyl));
    }
    write_file(out, "scores.csv", &csv, &mut manifest)?;

    let mut folds_csv = String::from("fold,index\n");
    for (f, fold) in cv_folds(dataset.n_obs(), cfg.cv_folds, seed)?.iter().enumerate() {
        for &i in fold {
            let _ = writeln!(folds_csv, "{f},{i}");
        }
    }
    write_file(out, "folds.csv", &folds_csv, &mut manifest)?;
    manifest.write(out)?;
    eprintln!("score: {} model(s) scored over {} folds", scores.len(), cfg.cv_folds);
    Ok(())
}

/// Read a numeric CSV with a header into named columns.
fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (lno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Data(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                lno + 1,
                fields.len(),
                header.len()
            )));
        }
        for (j, f) in fields.iter().enumerate() {
            cols[j].push(f.parse::<f64>().map_err(|e| {
                Error::Data(format!("{}: row {}: bad number {f}: {e}", path.display(), lno + 1))
            })?);
        }
    }
    Ok((header, cols))
}

fn column<'a>(
    header: &[String],
    cols: &'a [Vec<f64>],
    name: &str,
    path: &Path,
) -> Result<&'a Vec<f64>> {
    header
        .iter()
        .position(|h| h == name)
        .map(|i| &cols[i])
        .ok_or_else(|| Error::Data(format!("{}: missing column {name}", path.display())))
}

pub fn cmd_plot(dir: &Path) -> Result<()> {
    let mut produced: Vec<String> = Vec::new();

    let pred_path = dir.join("predictions.csv");
    if pred_path.exists() {
        let (header, cols) = read_columns(&pred_path)?;
        let svg = plot::quiver_svg(
            column(&header, &cols, "x", &pred_path)?,
            column(&header, &cols, "y", &pred_path)?,
            column(&header, &cols, "dir_mean", &pred_path)?,
            column(&header, &cols, "speed_q50", &pred_path)?,
            "predicted direction and speed",
        );
        std::fs::write(dir.join("quiver.svg"), svg)?;
        produced.push("quiver.svg".into());
    }

    let surf_path = dir.join("rho_surface.csv");
    if surf_path.exists() {
        let (header, cols) = read_columns(&surf_path)?;
        let svg = plot::surface_svg(
            column(&header, &cols, "x", &surf_path)?,
            column(&header, &cols, "y", &surf_path)?,
            column(&header, &cols, "rho", &surf_path)?,
            "posterior mean association surface",
        );
        std::fs::write(dir.join("rho_surface.svg"), svg)?;
        produced.push("rho_surface.svg".into());
    }

    let sel_path = dir.join("selection.csv");
    if sel_path.exists() {
        let text = std::fs::read_to_string(&sel_path)?;
        let mut labels = Vec::new();
        let mut dics = Vec::new();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() >= 2 {
                labels.push(fields[0].to_string());
                dics.push(fields[1].parse::<f64>().map_err(|e| {
                    Error::Data(format!("{}: bad DIC {}: {e}", sel_path.display(), fields[1]))
                })?);
            }
        }
        if !dics.is_empty() {
            let best = dics.iter().cloned().fold(f64::INFINITY, f64::min);
            let refs = vec![best; dics.len()];
            let svg = plot::criterion_scatter_svg(&refs, &dics, &labels, "DIC versus best model");
            std::fs::write(dir.join("dic_scatter.svg"), svg)?;
            produced.push("dic_scatter.svg".into());
        }
    }

    if produced.is_empty() {
        return Err(Error::Data(format!(
            "{}: nothing to plot (no predictions.csv, rho_surface.csv, or selection.csv)",
            dir.display()
        )));
    }
    if let Ok(mut manifest) = RunManifest::load(dir) {
        for name in &produced {
            if !manifest.outputs.contains(name) {
                manifest.record(name);
            }
        }
        manifest.write(dir)?;
    }
    eprintln!("plot: wrote {}", produced.join(", "));
    Ok(())
}
