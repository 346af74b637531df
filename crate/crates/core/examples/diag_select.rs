use pwc_core::copula::{CopulaFamily, CopulaSpec};
use pwc_core::fem::assemble_fem;
use pwc_core::mcmc::stage2::{fit_copula, PseudoObs, Stage2Config};
use pwc_core::mesh::Mesh;
use pwc_core::pipeline::{fit_margins, Dataset, FitConfig, SpatialContext};
use pwc_core::sim::{simulate_scenario, ScenarioConfig};
use rayon::prelude::*;

const FAMILIES: [CopulaFamily; 3] = [
    CopulaFamily::Gaussian,
    CopulaFamily::Clayton,
    CopulaFamily::Gumbel,
];

fn stage2_dic(pseudo: &PseudoObs, family: CopulaFamily, cfg: &Stage2Config, seed: u64) -> f64 {
    let fit = fit_copula(CopulaSpec::new(family), &[], pseudo, cfg, seed).unwrap();
    let dbar: f64 = -2.0
        * fit
            .chain
            .loglik
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .sum::<f64>()
        / fit.chain.loglik.len() as f64;
    let beta0 = fit.beta_mean(1).unwrap()[0];
    let spec = CopulaSpec::new(family);
    let r = spec.link_to_rho(beta0);
    let dhat: f64 = -2.0
        * pseudo
            .u1
            .iter()
            .zip(&pseudo.u2)
            .map(|(&a, &b)| spec.log_density(a, b, r))
            .sum::<f64>();
    2.0 * dbar - dhat
}

fn main() {
    let s2cfg = Stage2Config {
        iters: 5000,
        burn: 2000,
        thin: 4,
    };
    for truth in [CopulaFamily::Clayton, CopulaFamily::Gumbel] {
        let lines: Vec<(String, bool)> = (0..10u64)
            .into_par_iter()
            .map(|rep| {
                let mesh = Mesh::regular(26, 0.2).unwrap();
                let fem = assemble_fem(&mesh).unwrap();
                let scenario = ScenarioConfig::reference(truth, false);
                let sim = simulate_scenario(&scenario, &mesh, &fem, 900 + rep).unwrap();
                let dataset = Dataset {
                    sites: sim.sites.clone(),
                    phi: sim.phi.clone(),
                    y: sim.y.clone(),
                    z_ang: sim.z_beta.iter().map(|&z| vec![z]).collect(),
                    z_lin: sim.z_beta.iter().map(|&z| vec![z]).collect(),
                    z_rho: sim.z_rho.iter().map(|&z| vec![z]).collect(),
                };
                let ctx = SpatialContext::stationary(mesh).unwrap();
                let cfg = FitConfig::reduced();
                let margins = fit_margins(&dataset, &ctx, &cfg, 7000 + rep).unwrap();
                let ang_model = pwc_core::mcmc::stage1::Stage1Model::new(
                    &margins.ang_data,
                    &ctx.fem,
                    &ctx.z_kappa_nodes,
                    ctx.pc_lambda,
                )
                .unwrap();
                let lin_model = pwc_core::mcmc::stage1::Stage1Model::new(
                    &margins.lin_data,
                    &ctx.fem,
                    &ctx.z_kappa_nodes,
                    ctx.pc_lambda,
                )
                .unwrap();
                let pseudo = pwc_core::mcmc::stage2::pseudo_observations(
                    &ang_model,
                    &margins.ang_mean,
                    &lin_model,
                    &margins.lin_mean,
                )
                .unwrap();
                let dics: Vec<f64> = FAMILIES
                    .iter()
                    .map(|&f| stage2_dic(&pseudo, f, &s2cfg, 5000 + rep))
                    .collect();
                let win = FAMILIES[dics
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0];
                (
                    format!(
                        "  rep {rep}: G={:.1} C={:.1} Gu={:.1} -> {win}",
                        dics[0], dics[1], dics[2]
                    ),
                    win == truth,
                )
            })
            .collect();
        let wins = lines.iter().filter(|(_, w)| *w).count();
        println!("{truth}-true: {wins}/10");
        for (l, _) in lines {
            println!("{l}");
        }
    }
}
