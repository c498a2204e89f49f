//! EI, log-EI, UCB and LCB along a line, with the beta schedule.
use usemo::acquisition::{beta_t, ei, lcb, log_ei, ucb, BetaSchedule};
use usemo::gp::{GpModel, SeKernelParams};

fn main() -> usemo::Result<()> {
    let xs = vec![vec![0.1], vec![0.4], vec![0.9]];
    let ys = [1.0, -0.5, 0.8];
    let model = GpModel::fit(&xs, &ys, SeKernelParams::new(1.0, vec![0.2], 1e-6)?)?;

    let schedule = BetaSchedule::default();
    for t in [1, 10, 100] {
        println!("beta_{t} = {:.3}", beta_t(&schedule, t));
    }
    let beta = beta_t(&schedule, 5);
    let tau = model.best_target();
    println!("{:>5} {:>10} {:>10} {:>9} {:>9}", "x", "ei", "log_ei", "ucb", "lcb");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let p = model.posterior(&[x]);
        println!(
            "{x:>5.2} {:>10.3e} {:>10.3} {:>9.3} {:>9.3}",
            ei(p, tau),
            log_ei(p, tau),
            ucb(p, beta),
            lcb(p, beta)
        );
    }
    Ok(())
}
