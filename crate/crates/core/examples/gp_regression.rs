//! Fit a GP to a 1-d function, tune hyperparameters and print the posterior.
use usemo::gp::{refit_hyperparameters, GpModel, RefitOptions, SeKernelParams};

fn main() -> usemo::Result<()> {
    let f = |x: f64| (6.0 * x).sin() + 0.5 * x;
    let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| f(x[0])).collect();

    let model = GpModel::fit(&xs, &ys, SeKernelParams::default_for(1))?;
    let (tuned, report) = refit_hyperparameters(&model, &RefitOptions::default())?;
    println!("before: lml {:.3}", model.log_marginal_likelihood());
    println!("after:  {report}");
    println!("kernel: {:?}", tuned.kernel());

    println!("{:>5} {:>8} {:>8} {:>8}", "x", "f(x)", "mean", "stddev");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let p = tuned.normalizer().denormalize_posterior(tuned.posterior(&[x]));
        println!("{x:>5.2} {:>8.4} {:>8.4} {:>8.4}", f(x), p.mean, p.stddev);
    }
    Ok(())
}
