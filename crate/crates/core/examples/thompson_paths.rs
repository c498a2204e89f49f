//! Draw Thompson sample paths and compare their spread with the posterior.
use usemo::acquisition::draw_sample_path;
use usemo::gp::{GpModel, SeKernelParams};

fn main() -> usemo::Result<()> {
    let xs = vec![vec![0.2], vec![0.5], vec![0.7]];
    let model = GpModel::fit(&xs, &[0.0, 1.0, -1.0], SeKernelParams::new(1.0, vec![0.15], 1e-6)?)?;
    let paths: Vec<_> = (0..200).map(|s| draw_sample_path(&model, 500, s)).collect::<Result<_, _>>()?;

    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "x", "mean", "path_mean", "stddev", "path_sd");
    for i in 0..=10 {
        let x = [i as f64 / 10.0];
        let vals: Vec<f64> = paths.iter().map(|p| p.eval(&x)).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        let post = model.posterior(&x);
        println!("{:>5.2} {:>9.4} {m:>9.4} {:>9.4} {sd:>9.4}", x[0], post.mean, post.stddev);
    }
    Ok(())
}
