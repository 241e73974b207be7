//! Higher-order moments `E[x^α]` read off the observer state alongside the
//! state estimate.

use koopman_observer::basis::MultiIndex;
use koopman_observer::cli::presets;
use koopman_observer::design::{lift_initial, recover_moment, recover_state};
use koopman_observer::sim::{integrate_observer, integrate_plant, synthesize, PlantModel};

fn main() {
    let e = presets::load("experiment1").unwrap().to_experiment().unwrap();
    let s = synthesize(&e).unwrap();
    let r = &s.realization;
    let plant = PlantModel {
        field: e.field.clone(),
        output: e.output.clone(),
        x0: e.x0.clone(),
    };
    let t_end = 6.0;
    let traj = integrate_plant(&plant, e.dt, t_end).unwrap();
    let f0 = lift_initial(&e.xhat0, &s.spectral).unwrap();
    let fs = integrate_observer(r, &traj.y, &f0, e.dt, traj.steps()).unwrap();

    let x1sq = MultiIndex::new(vec![2, 0, 0]);
    let x2x3 = MultiIndex::new(vec![0, 1, 1]);
    println!("    t      x1^2 true   x1^2 est    x2 x3 true  x2 x3 est");
    for k in (0..fs.len()).step_by(1000) {
        let x = &traj.x[k];
        let m1 = recover_moment(&fs[k], &x1sq, r).unwrap();
        let m2 = recover_moment(&fs[k], &x2x3, r).unwrap();
        println!(
            "{:5.1}  {:10.6}  {:10.6}  {:10.6}  {:10.6}",
            traj.t[k],
            x[0] * x[0],
            m1.re,
            x[1] * x[2],
            m2.re
        );
    }
    let last = recover_state(fs.last().unwrap(), r);
    println!("final state estimate {:.6?}", last.x);
    println!("final true state     {:.6?}", traj.x.last().unwrap());
}
