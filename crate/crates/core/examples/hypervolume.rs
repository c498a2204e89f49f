//! Exact and Monte-Carlo hypervolume, PHV difference and R2 distance.
use usemo::metrics::{hypervolume, hypervolume_estimate, phv_difference, r2_distance, IdealFront, ReferencePoint};
use usemo::pareto::ObjectiveVector;

fn main() -> usemo::Result<()> {
    let r = ReferencePoint(vec![3.0, 3.0]);
    println!("HV {{(1,2),(2,1)}} = {}", hypervolume(&[vec![1.0, 2.0], vec![2.0, 1.0]], &r)?);

    let ideal = IdealFront::new(
        [[1.0, 2.0], [2.0, 1.0], [1.5, 1.5]]
            .iter()
            .map(|p| ObjectiveVector::new(p.to_vec()))
            .collect::<Result<_, _>>()?,
    )?;
    let partial = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
    println!("PHV difference = {}", phv_difference(&partial, &ideal, &r)?);
    println!("R2 distance    = {:.4}", r2_distance(&partial, &ideal)?);

    let front5: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| if i == j { 0.2 } else { 0.8 }).collect()).collect();
    let est = hypervolume_estimate(&front5, &ReferencePoint(vec![1.0; 5]))?;
    println!("5-objective HV ~ {:.4} +/- {:.4}", est.value, est.std_error);
    Ok(())
}
