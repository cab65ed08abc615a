//! Scratch probe: embedding-analysis numbers on desk-scale Lorenz data.

use delaycast_core::dynsys::{simulate_lorenz, LorenzParams};
use delaycast_core::embedding::{
    false_nearest_neighbors, first_minimum, mutual_information, project, ObservationSpec,
};

fn main() {
    let t0 = std::time::Instant::now();
    let truth = simulate_lorenz(&LorenzParams::default(), 100_000, 0.1, 10_000, 1).unwrap();
    println!("simulate: {:?}", t0.elapsed());

    let x = project(&truth, &ObservationSpec::new(vec![0]).unwrap()).unwrap();
    let t1 = std::time::Instant::now();
    let mi = mutual_information(&x, 0, 10, 16).unwrap();
    println!("mi ({:?}): {:?}", t1.elapsed(), mi);
    println!("first_minimum: {:?}", first_minimum(&mi));

    for (label, idx) in [("x", 0usize), ("y", 1), ("z", 2)] {
        let p = project(&truth, &ObservationSpec::new(vec![idx]).unwrap()).unwrap();
        let t2 = std::time::Instant::now();
        let fnn = false_nearest_neighbors(&p, &ObservationSpec::new(vec![0]).unwrap(), 1, 6, 10.0, 2.0)
            .unwrap();
        println!("fnn[{label}] ({:?}): {:?}", t2.elapsed(), fnn);
    }

    // Lorenz attractor confinement.
    let zmax = truth
        .values
        .column(2)
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v.abs()));
    println!("max |z| over 1e4 time units: {zmax}");

    // Scale of x for the normalization example.
    let xs = x.values.column(0);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let std = (xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / xs.len() as f64).sqrt();
    println!("std(x) = {std}");
}
