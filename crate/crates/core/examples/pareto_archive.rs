//! Dominance checks, Pareto filtering and the incremental archive.
use usemo::pareto::{dominates, pareto_filter, Evaluation, InputPoint, ObjectiveVector, ParetoArchive};

fn main() -> usemo::Result<()> {
    println!("(1,2) dominates (2,3): {}", dominates(&[1.0, 2.0], &[2.0, 3.0])?);
    println!("(1,2) dominates (2,1): {}", dominates(&[1.0, 2.0], &[2.0, 1.0])?);

    let points = [[3.0, 1.0], [1.0, 3.0], [2.0, 2.0], [2.5, 2.5], [1.0, 3.0]];
    let objs: Vec<ObjectiveVector> = points.iter().map(|p| ObjectiveVector::new(p.to_vec())).collect::<Result<_, _>>()?;
    println!("filtered front: {:?}", pareto_filter(&objs)?);

    let mut archive = ParetoArchive::new();
    for (i, p) in points.iter().enumerate() {
        let kept = archive.insert(Evaluation {
            input: InputPoint(vec![i as f64]),
            output: ObjectiveVector::new(p.to_vec())?,
            iteration: i,
        })?;
        println!("insert {p:?}: kept={kept}, archive size {}", archive.len());
    }
    println!("pareto set inputs: {:?}", archive.pareto_set());
    Ok(())
}
