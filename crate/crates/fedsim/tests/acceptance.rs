//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use fedsim::config::parse_config_str;
use fedsim::exec::RayonExecutor;
use fedsim::metrics::metrics_csv;
use fedsim::pipeline::prepare;
use fedsim_core::data::{augment, generate_synthetic, partition_by_source, partition_iid, AugmentationPolicy, SyntheticConfig};
use fedsim_core::experiments::{drive_epochs, run_experiment, EarlyStopping, ExperimentConfig, History, Runtime, StopReason, Topology};
use fedsim_core::federation::wire::{decode_parameter_message, encode_parameter_message, ParameterMessage};
use fedsim_core::federation::{fedavg_aggregate, global_objective, NullClock, RoundRecord, SerialExecutor};
use fedsim_core::nn::{conv2d, evaluate, init_parameters, loss_and_grad, InputShape, LayerKind, ModelSpec, ParameterSet};
use fedsim_core::oracle::{finite_difference_gradients, relative_error};
use fedsim_core::rng::derive_rng;
use fedsim_core::Tensor;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 ---------------------------------------------------------------------

const GRAD_STEP: f64 = 1e-3;
const GRAD_TOLERANCE: f64 = 1e-3;
const GRAD_FLOOR: f64 = 1e-4;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(60);

/// Kink-free draws checked per run.
const GRAD_CASES: usize = 3;

/// Smallest gap between the two largest entries of any 2x2 pooling window
/// of the toy net's convolution output.
fn min_pool_gap(params: &ParameterSet, pixels: &[f32], n: usize) -> f32 {
    let conv = &params.layers()[0];
    let mut gap = f32::INFINITY;
    for s in 0..n {
        let x = Tensor::from_vec(&[8, 8, 1], pixels[s * 64..(s + 1) * 64].to_vec()).unwrap();
        let y = conv2d(&x, &conv.weight, &conv.bias).unwrap();
        let f = y.shape()[2];
        let d = y.data();
        for i in (0..8).step_by(2) {
            for j in (0..8).step_by(2) {
                for c in 0..f {
                    let mut v = [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(a, b)| d[((i + a) * 8 + j + b) * f + c]);
                    v.sort_by(|a, b| b.total_cmp(a));
                    gap = gap.min(v[0] - v[1]);
                }
            }
        }
    }
    gap
}

/// Central differences are only meaningful where the loss is differentiable
/// within one step. Max pooling is the toy net's only kink: a weight step
/// moves each pooled candidate by at most `step` (inputs lie in [0, 1]), so
/// draws whose pooling windows hold two candidates within `2 * step` of each
/// other are skipped rather than compared.
fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let spec = ModelSpec::new(
        InputShape::square(8, 1),
        3,
        vec![
            LayerKind::Conv { filters: 4 },
            LayerKind::MaxPool,
            LayerKind::Flatten,
            LayerKind::Dense { units: 3 },
            LayerKind::Softmax,
        ],
    );
    let mut worst = 0.0f64;
    let mut coords = 0;
    let (mut checked, mut skipped) = (0, 0);
    let mut seed = 0u64;
    while checked < GRAD_CASES {
        ensure(seed < 1000, || "no kink-free draw found".into())?;
        let mut params = init_parameters(&spec, seed).map_err(e2s)?;
        let mut rng = derive_rng(seed, &[7]);
        for l in params.layers_mut() {
            for b in l.bias.data_mut() {
                *b = rng.random_range(-0.1..0.1);
            }
        }
        let n = 4;
        let pixels: Vec<f32> = (0..n * 64).map(|_| rng.random::<f32>()).collect();
        if f64::from(min_pool_gap(&params, &pixels, n)) <= 2.0 * GRAD_STEP {
            skipped += 1;
            seed += 1;
            continue;
        }
        let batch = Tensor::from_vec(&[n, 8, 8, 1], pixels).map_err(e2s)?;
        let labels: Vec<usize> = (0..n).map(|i| (i + seed as usize) % 3).collect();
        let (_, grads) = loss_and_grad(&spec, &params, &batch, &labels, &mut derive_rng(seed, &[8])).map_err(e2s)?;
        let fd = finite_difference_gradients(&spec, &params, &batch, &labels, None, GRAD_STEP);
        for (g, f) in grads.tensors().zip(&fd) {
            for (&a, &b) in g.data().iter().zip(f) {
                worst = worst.max(relative_error(f64::from(a), b, GRAD_FLOOR));
                coords += 1;
            }
        }
        checked += 1;
        seed += 1;
    }
    let elapsed = start.elapsed();
    ensure(worst < GRAD_TOLERANCE, || format!("worst relative error {worst:.2e} >= {GRAD_TOLERANCE:.0e}"))?;
    ensure(elapsed < GRAD_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{coords} coordinates over {checked} draws ({skipped} near-tie draws skipped), worst relative error {worst:.2e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// 2 ---------------------------------------------------------------------

const AGG_TOLERANCE: f64 = 1e-7;

fn filled(spec: &ModelSpec, v: f32) -> ParameterSet {
    let n = spec.param_count().unwrap();
    ParameterSet::from_flat(spec, &vec![v; n]).unwrap()
}

fn fedavg_arithmetic() -> Outcome {
    let spec = ModelSpec::with_widths(8, 3, [1, 1, 1, 1], 2);
    let (a, b) = (filled(&spec, 1.0), filled(&spec, 2.0));
    let agg = fedavg_aggregate(&[(2, &a), (6, &b)]).map_err(e2s)?;
    let worst = agg.flat().iter().map(|&v| (f64::from(v) - 1.75).abs()).fold(0.0, f64::max);
    ensure(worst <= AGG_TOLERANCE, || format!("aggregate off 1.75 by {worst:e}"))?;
    let swapped = fedavg_aggregate(&[(6, &b), (2, &a)]).map_err(e2s)?;
    ensure(swapped == agg, || "permuting the updates changed the aggregate".into())?;

    let w = init_parameters(&spec, 3).map_err(e2s)?;
    let same = fedavg_aggregate(&[(3, &w), (5, &w), (11, &w)]).map_err(e2s)?;
    let bits = |p: &ParameterSet| p.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&same) == bits(&w), || "identical updates are not a fixed point".into())?;

    // permutation invariance on random updates
    let ws: Vec<ParameterSet> = (0..5).map(|s| init_parameters(&spec, 10 + s).unwrap()).collect();
    let ns = [3usize, 9, 1, 4, 7];
    let fwd: Vec<(usize, &ParameterSet)> = ns.iter().copied().zip(ws.iter()).collect();
    let rev: Vec<(usize, &ParameterSet)> = fwd.iter().rev().copied().collect();
    let (x, y) = (fedavg_aggregate(&fwd).map_err(e2s)?, fedavg_aggregate(&rev).map_err(e2s)?);
    ensure(bits(&x) == bits(&y), || "random updates: permutation changed the aggregate".into())?;
    Ok(format!("aggregate 1.75 (max error {worst:e}); permutation and fixed point exact"))
}

// 3 ---------------------------------------------------------------------

const OBJECTIVE_TOLERANCE: f64 = 1e-5;

fn objective_invariance() -> Outcome {
    let data = generate_synthetic(&SyntheticConfig {
        n_classes: 10,
        per_class: 20,
        source_tags: vec!["a".into(), "b".into()],
        class_source_skew: 0.5,
        side: 16,
        seed: 3,
    })
    .map_err(e2s)?;
    ensure(data.len() == 200, || format!("{} records", data.len()))?;
    let spec = ModelSpec::with_widths(16, 10, [4, 4, 8, 8], 16);
    let params = init_parameters(&spec, 17).map_err(e2s)?;
    let central = evaluate(&spec, &params, &data).map_err(e2s)?.mean_loss;
    let mut worst = 0.0f64;
    for k in [1usize, 2, 5, 10] {
        let parts = partition_iid(&data, k, 5).map_err(e2s)?;
        let f = global_objective(&spec, &params, &data, &parts).map_err(e2s)?;
        worst = worst.max((f - central).abs());
        if k >= 2 {
            let parts = partition_by_source(&data, k).map_err(e2s)?;
            let f = global_objective(&spec, &params, &data, &parts).map_err(e2s)?;
            worst = worst.max((f - central).abs());
        }
    }
    ensure(worst < OBJECTIVE_TOLERANCE, || format!("max deviation {worst:e}"))?;
    Ok(format!("centralized mean loss {central:.6}, max deviation over K in {{1,2,5,10}} {worst:.1e}"))
}

// 4 ---------------------------------------------------------------------

const EQUIVALENCE_EPOCHS: usize = 10;
const EQUIVALENCE_TIME_LIMIT: Duration = Duration::from_secs(300);

fn trajectory(cfg: &ExperimentConfig, train: &fedsim_core::data::Dataset, test: &fedsim_core::data::Dataset) -> Result<(History, Vec<ParameterSet>), String> {
    let mut weights = Vec::new();
    let mut keep = |_: &RoundRecord, p: &ParameterSet| weights.push(p.clone());
    let mut rt = Runtime { executor: &SerialExecutor, clock: &NullClock, observer: Some(&mut keep) };
    let h = run_experiment(cfg, train, test, &mut rt).map_err(e2s)?;
    Ok((h, weights))
}

fn one_client_equivalence() -> Outcome {
    let start = Instant::now();
    let mut run = parse_config_str(
        "topology = cl\nrounds = 10\nbatch_size = 8\nlocal_epochs = 1\nlr = 0.01\nseed = 4\n\
         data.classes = 11\ndata.per_class = 30\naugment = off\nimage_size = 32\nmodel.conv = 8,8,16,16\nmodel.dense = 32",
    )
    .map_err(e2s)?;
    let data = prepare(&mut run).map_err(e2s)?;
    ensure(data.train.len() + data.test.len() == 330, || "expected 330 images".into())?;
    let cl_cfg = run.experiment.clone();
    let mut fl_cfg = cl_cfg.clone();
    fl_cfg.topology = Topology::Federated;
    fl_cfg.clients = 1;
    let (cl, cl_w) = trajectory(&cl_cfg, &data.train, &data.test)?;
    let (fl, fl_w) = trajectory(&fl_cfg, &data.train, &data.test)?;
    ensure(cl.records.len() == EQUIVALENCE_EPOCHS && fl.records.len() == EQUIVALENCE_EPOCHS, || "wrong epoch count".into())?;
    for (e, (a, b)) in cl_w.iter().zip(&fl_w).enumerate() {
        let same = a.flat().iter().zip(b.flat()).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, || format!("weights diverge at epoch {}", e + 1))?;
    }
    for (a, b) in cl.records.iter().zip(&fl.records) {
        ensure(a.test_accuracy.to_bits() == b.test_accuracy.to_bits(), || format!("accuracy differs at epoch {}", a.round))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < EQUIVALENCE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "10 epochs bit-identical weights and accuracies (final {:.4}), {:.1}s",
        cl.final_accuracy(),
        elapsed.as_secs_f64()
    ))
}

// 5 ---------------------------------------------------------------------

const TREND_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);
/// ME-FL(K=10) must trail FL(K=10) by more than this.
const MEFL_GAP: f64 = 0.10;
/// Desk-scale setup: 2 sources, every class tied to one source, no
/// augmentation, 32x32 inputs and a narrow CNN. The learning rate stands in
/// for the full-size model's 0.0001, scaled to this net and data.
const TREND_CONFIG: &str = "topology = cl\nrounds = 75\nbatch_size = 8\nlocal_epochs = 1\nlr = 0.02\nseed = 0\n\
    data.classes = 11\ndata.per_class = 30\ndata.skew = 1\ndata.sources = source-a,source-b\naugment = off\n\
    image_size = 32\nmodel.conv = 8,8,16,16\nmodel.dense = 32";

fn trend_reproduction() -> Outcome {
    let start = Instant::now();
    let mut run = parse_config_str(TREND_CONFIG).map_err(e2s)?;
    let data = prepare(&mut run).map_err(e2s)?;
    let base = run.experiment.clone();
    let final_acc = |topology: Topology, k: usize| -> Result<f64, String> {
        let mut cfg = base.clone();
        cfg.topology = topology;
        cfg.clients = k;
        let h = run_experiment(&cfg, &data.train, &data.test, &mut Runtime::serial()).map_err(e2s)?;
        Ok(h.final_accuracy())
    };
    let cl = final_acc(Topology::Centralized, 1)?;
    let fl: Vec<(usize, f64)> = [1, 2, 3, 8, 9, 10]
        .into_iter()
        .map(|k| final_acc(Topology::Federated, k).map(|a| (k, a)))
        .collect::<Result<_, _>>()?;
    let mefl10 = final_acc(Topology::MutuallyExclusive, 10)?;
    let fl10 = fl[5].1;
    let low = fl[..3].iter().map(|x| x.1).sum::<f64>() / 3.0;
    let high = fl[3..].iter().map(|x| x.1).sum::<f64>() / 3.0;
    let elapsed = start.elapsed();
    let summary = format!(
        "CL {cl:.4}; FL {}; ME-FL(10) {mefl10:.4}; FL mean K1-3 {low:.4} vs K8-10 {high:.4}; {:.0}s",
        fl.iter().map(|(k, a)| format!("K{k}={a:.4}")).collect::<Vec<_>>().join(" "),
        elapsed.as_secs_f64()
    );
    ensure(cl >= fl10 && fl10 >= mefl10, || format!("(a) ordering violated: {summary}"))?;
    ensure(low - high >= 0.0, || format!("(b) no downward trend: {summary}"))?;
    ensure(mefl10 < fl10 - MEFL_GAP, || format!("(c) ME-FL gap too small: {summary}"))?;
    ensure(elapsed < TREND_TIME_LIMIT, || format!("took {elapsed:?}: {summary}"))?;
    Ok(summary)
}

// 6 ---------------------------------------------------------------------

fn augmentation_cardinality() -> Outcome {
    let ds = generate_synthetic(&SyntheticConfig {
        n_classes: 7,
        per_class: 43,
        source_tags: vec!["a".into(), "b".into()],
        class_source_skew: 1.0,
        side: 8,
        seed: 1,
    })
    .map_err(e2s)?;
    ensure(ds.len() == 301, || format!("{} inputs", ds.len()))?;
    let out = augment(&ds, &AugmentationPolicy::default(), 9).map_err(e2s)?;
    ensure(out.len() == 2107, || format!("{} outputs", out.len()))?;
    Ok("301 inputs -> 2107 outputs".into())
}

// 7 ---------------------------------------------------------------------

fn early_stopping() -> Outcome {
    let policy = Some(EarlyStopping { min_epochs: 50, delta: 1e-6 });
    let stream = |acc: fn(u32) -> f64| {
        drive_epochs(75, policy, |e| Ok(RoundRecord { round: e, test_accuracy: acc(e), train_loss: 0.0, seconds: 0.0 }))
    };
    let (flat, why) = stream(|_| 0.42).map_err(e2s)?;
    ensure(flat.len() == 51 && why == StopReason::EarlyStop, || format!("constant stream stopped after {} ({why:?})", flat.len()))?;
    let (moving, why) = stream(|e| 0.5 + 0.01 * f64::from(e % 2)).map_err(e2s)?;
    ensure(moving.len() == 75 && why == StopReason::Cap, || format!("moving stream stopped after {} ({why:?})", moving.len()))?;
    Ok("constant stream stops at epoch 51; |delta| = 0.01 stream runs to 75".into())
}

// 8 ---------------------------------------------------------------------

const WIRE_MESSAGES: usize = 1000;

fn random_message(rng: &mut impl Rng) -> ParameterMessage {
    let tensors = (0..rng.random_range(1..=5))
        .map(|_| {
            let shape: Vec<usize> = (0..rng.random_range(1..=4)).map(|_| rng.random_range(1..=5)).collect();
            let n = shape.iter().product();
            Tensor::from_vec(&shape, (0..n).map(|_| f32::from_bits(rng.random())).collect()).unwrap()
        })
        .collect();
    ParameterMessage::new(rng.random(), rng.random(), rng.random(), tensors).unwrap()
}

fn wire_format() -> Outcome {
    let mut rng = derive_rng(2024, &[]);
    let mut corruptions = 0usize;
    for i in 0..WIRE_MESSAGES {
        let msg = random_message(&mut rng);
        let bytes = encode_parameter_message(&msg);
        let back = decode_parameter_message(&bytes).map_err(|e| format!("message {i}: {e}"))?;
        ensure(encode_parameter_message(&back) == bytes, || format!("message {i} did not round-trip"))?;
        let bits = |m: &ParameterMessage| m.tensors().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect::<Vec<_>>();
        ensure(
            back.round() == msg.round() && back.client() == msg.client() && back.n_k() == msg.n_k() && bits(&back) == bits(&msg),
            || format!("message {i} fields differ"),
        )?;
        let mut corrupt = bytes.clone();
        for pos in 0..msg.header_len() {
            for flip in 1..=255u8 {
                corrupt[pos] ^= flip;
                let detected = decode_parameter_message(&corrupt).is_err();
                corrupt[pos] ^= flip;
                ensure(detected, || format!("message {i}: byte {pos} ^ {flip:#04x} not detected"))?;
                corruptions += 1;
            }
        }
    }
    Ok(format!("{WIRE_MESSAGES} messages round-trip bit-exactly; {corruptions} single-byte header corruptions all detected"))
}

// 9 ---------------------------------------------------------------------

fn determinism() -> Outcome {
    let mut run = parse_config_str(
        "topology = fl\nclients = 4\nrounds = 20\nlr = 0.01\nseed = 9\n\
         data.classes = 11\ndata.per_class = 20\naugment = off\nimage_size = 32\nmodel.conv = 8,8,16,16\nmodel.dense = 32",
    )
    .map_err(e2s)?;
    let data = prepare(&mut run).map_err(e2s)?;
    let cfg = &run.experiment;
    let serial = run_experiment(cfg, &data.train, &data.test, &mut Runtime::serial()).map_err(e2s)?;
    let mut rt = Runtime { executor: &RayonExecutor, clock: &NullClock, observer: None };
    let parallel = run_experiment(cfg, &data.train, &data.test, &mut rt).map_err(e2s)?;
    let (a, b) = (metrics_csv(&[&serial]), metrics_csv(&[&parallel]));
    ensure(serial.records.len() == 20, || format!("{} rounds", serial.records.len()))?;
    ensure(a == b, || "serial and parallel CSVs differ".into())?;
    ensure(serial.final_params == parallel.final_params, || "final weights differ".into())?;
    Ok(format!("20-round K=4 CSVs byte-identical ({} bytes), final weights equal", a.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient oracle", gradient_oracle),
        ("fedavg arithmetic", fedavg_arithmetic),
        ("objective partition invariance", objective_invariance),
        ("one-client equivalence", one_client_equivalence),
        ("trend reproduction", trend_reproduction),
        ("augmentation cardinality", augmentation_cardinality),
        ("early stopping", early_stopping),
        ("wire format", wire_format),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS criterion {id} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
