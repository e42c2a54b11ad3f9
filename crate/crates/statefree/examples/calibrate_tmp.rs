use statefree::evalsuite::grid::{CellSpec, DatasetPreset, ExperimentContext};
use statefree::learner::train::{build_samples, train_bc};
use statefree::learner::net::PolicyNet;
use statefree::sensing::StateMode;
use statefree::rngstream::stream;

fn main() {
    let seed = 101;
    let mut ctx = ExperimentContext::new(seed);
    let ds = ctx.dataset(DatasetPreset::Standard, 300, None).unwrap();

    // (a) loss curve shape, state-free
    let cell = CellSpec::default_state_free();
    let mut cfg = cell.train_config(seed);
    cfg.epochs = 40;
    let m = train_bc(&ds, &cfg).unwrap();
    let lc = &m.loss_curve;
    println!("SF loss curve: e1 {:.4} e5 {:.4} e10 {:.4} e20 {:.4} e40 {:.4}",
        lc[0], lc[4], lc[9], lc[19], lc[39]);

    // (b) can the same net overfit 512 samples?
    let samples = build_samples(&ds, &cfg).unwrap();
    let n = 512.min(samples.n);
    let d_in = samples.input_dim;
    let d_out = samples.target_dim;
    let inputs = &samples.inputs[..n * d_in];
    let targets = &samples.targets[..n * d_out];
    // normalize crudely using the model's normalizers
    let mut xs = inputs.to_vec();
    for row in xs.chunks_exact_mut(d_in) { m.input_norm.normalize_in_place(row); }
    let mut ts = targets.to_vec();
    for row in ts.chunks_exact_mut(d_out) { m.target_norm.normalize_in_place(row); }
    let sizes = [d_in, 128, 64, d_out];
    let mut net = PolicyNet::init(&sizes, &mut stream(7, 0));
    let mut params = net.params_flat();
    let mut adam = statefree_adam(params.len(), 1e-3);
    for it in 0..2000 {
        net.set_params_flat(&params);
        let (loss, grad) = net.loss_and_grad(&xs, &ts, n).unwrap();
        adam_update(&mut adam, &mut params, &grad.flat());
        if it % 400 == 0 { println!("overfit512 it {it}: loss {loss:.5}"); }
    }

    // (c) fitting speed: state-based
    let cellb = CellSpec::default_state_based();
    let mut cfgb = cellb.train_config(seed);
    cfgb.epochs = 40;
    let mb = train_bc(&ds, &cfgb).unwrap();
    let lcb = &mb.loss_curve;
    println!("SB loss curve: e1 {:.4} e5 {:.4} e10 {:.4} e20 {:.4} e40 {:.4}",
        lcb[0], lcb[4], lcb[9], lcb[19], lcb[39]);
    let _ = StateMode::None;
}

struct AdamS { m: Vec<f64>, v: Vec<f64>, t: i32, lr: f64 }
fn statefree_adam(n: usize, lr: f64) -> AdamS { AdamS { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr } }
fn adam_update(a: &mut AdamS, p: &mut [f64], g: &[f64]) {
    a.t += 1;
    let b1 = 0.9f64; let b2 = 0.999f64;
    let b1t = 1.0 - b1.powi(a.t); let b2t = 1.0 - b2.powi(a.t);
    for i in 0..p.len() {
        a.m[i] = b1 * a.m[i] + (1.0 - b1) * g[i];
        a.v[i] = b2 * a.v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= a.lr * (a.m[i] / b1t) / ((a.v[i] / b2t).sqrt() + 1e-8);
    }
}
