use ovowatch::eval::*;
use ovowatch::features::FeatureConfig;
use ovowatch::simgen::{generate_dataset, GeneratorConfig, LabelRule};
use ovowatch::svm::{KernelSpec, TrainConfig};

fn main() {
    let kernel = KernelSpec::rbf(5.0);
    let final_feat = FeatureConfig { window_size: 14, forecast_interval: 0 };
    let train = TrainConfig::default();

    // FI trend (final config), 2 corpora
    for gseed in [42u64, 43] {
        let cfg = GeneratorConfig { seed: gseed, ..GeneratorConfig::default() };
        let flocks: Vec<_> = generate_dataset(&cfg, &LabelRule::default()).unwrap()
            .into_iter().map(|f| f.series).collect();
        let cv = CvConfig { k: 5, repetitions: 4, seed: 1 };
        let sw = sweep_factor(&flocks, &final_feat, &kernel, &train, Factor::Horizon, &default_levels(Factor::Horizon, 5.0), &cv, 0.01).unwrap();
        println!("corpus {gseed} FI sens: {}  acc0 {:.4} spec0 {:.4} ppv: {}",
            (0..6).map(|l| format!("{:.3}", sw.level_mean(l,"sensitivity").unwrap())).collect::<Vec<_>>().join(" "),
            sw.level_mean(0,"accuracy").unwrap(), sw.level_mean(0,"specificity").unwrap(),
            (0..6).map(|l| format!("{:.3}", sw.level_mean(l,"ppv").unwrap_or(f64::NAN))).collect::<Vec<_>>().join(" "));
    }

    // kernel at paper baseline W7 C0.1 FI1
    let baseline_feat = FeatureConfig { window_size: 7, forecast_interval: 1 };
    let baseline_train = TrainConfig { c: 0.1, ..TrainConfig::default() };
    let mut wins = 0;
    for seed in 0..6u64 {
        let cfg = GeneratorConfig { seed: 100 + seed, ..GeneratorConfig::default() };
        let flocks: Vec<_> = generate_dataset(&cfg, &LabelRule::default()).unwrap()
            .into_iter().map(|f| f.series).collect();
        let cv = CvConfig { k: 5, repetitions: 6, seed };
        let levels = vec![FactorLevel::Kernel(KernelSpec::rbf(5.0)), FactorLevel::Kernel(KernelSpec::linear())];
        let sw = sweep_factor(&flocks, &baseline_feat, &kernel, &baseline_train, Factor::Kernel, &levels, &cv, 0.01).unwrap();
        let g = sw.tukey_for("accuracy").unwrap();
        let win = g.is_significant(0, 1) && g.means[0] > g.means[1];
        wins += win as u32;
        println!("kernel@base seed {seed}: rbf {:.4} lin {:.4} sig {} | ppv {:.3}/{:.3} sens {:.3}/{:.3}",
            g.means[0], g.means[1], g.is_significant(0,1),
            sw.level_mean(0,"ppv").unwrap_or(f64::NAN), sw.level_mean(1,"ppv").unwrap_or(f64::NAN),
            sw.level_mean(0,"sensitivity").unwrap(), sw.level_mean(1,"sensitivity").unwrap());
    }
    println!("kernel@baseline: {wins}/6");

    // window at Table5 baseline FI1 sigma5 C0.15
    let w_feat = FeatureConfig { window_size: 14, forecast_interval: 1 };
    let mut wins = 0;
    for seed in 0..6u64 {
        let cfg = GeneratorConfig { seed: 100 + seed, ..GeneratorConfig::default() };
        let flocks: Vec<_> = generate_dataset(&cfg, &LabelRule::default()).unwrap()
            .into_iter().map(|f| f.series).collect();
        let cv = CvConfig { k: 5, repetitions: 6, seed };
        let levels = vec![FactorLevel::Window(7), FactorLevel::Window(14)];
        let sw = sweep_factor(&flocks, &w_feat, &kernel, &train, Factor::Window, &levels, &cv, 0.01).unwrap();
        let (w7, w14) = (sw.level_mean(0, "ppv"), sw.level_mean(1, "ppv"));
        let win = match (w7, w14) { (Some(a), Some(b)) => a < b, _ => false };
        wins += win as u32;
        println!("window seed {seed}: ppv W7 {:.4} W14 {:.4} | acc {:.4}/{:.4}",
            w7.unwrap_or(f64::NAN), w14.unwrap_or(f64::NAN),
            sw.level_mean(0,"accuracy").unwrap(), sw.level_mean(1,"accuracy").unwrap());
    }
    println!("window@FI1: {wins}/6");

    // corpus stats
    let mut fr = (1.0f64, 0.0f64);
    for seed in 0..20u64 {
        let cfg = GeneratorConfig { seed: 7000 + seed, ..GeneratorConfig::default() };
        let flocks = generate_dataset(&cfg, &LabelRule::default()).unwrap();
        let total: usize = flocks.iter().map(|f| f.series.len()).sum();
        let pos: usize = flocks.iter().map(|f| f.series.positive_label_count()).sum();
        let r = pos as f64 / total as f64;
        fr = (fr.0.min(r), fr.1.max(r));
    }
    println!("A8 fraction range: [{:.4}, {:.4}]", fr.0, fr.1);
}
