use fedsim_core::data::{generate_synthetic, partition_by_source, partition_iid, split_train_test, Dataset, Partition, SyntheticConfig};
use fedsim_core::experiments::{run_centralized, run_federated, ExperimentConfig, Runtime, StopReason, Topology};
use fedsim_core::federation::{
    global_objective, local_training, ClientState, FedAvgConfig, GlobalState, NullClock, SerialExecutor,
    TrainingContext,
};
use fedsim_core::nn::{evaluate, init_parameters, loss_and_grad, sgd_step, ModelSpec, ParameterSet};
use fedsim_core::rng::client_rng;
use fedsim_core::Tensor;

const SIDE: usize = 8;

fn spec() -> ModelSpec {
    ModelSpec::with_widths(SIDE, 11, [3, 3, 4, 4], 8)
}

fn data(per_class: usize, skew: f32) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_classes: 11,
        per_class,
        source_tags: vec!["A".into(), "B".into()],
        class_source_skew: skew,
        side: SIDE,
        seed: 11,
    })
    .unwrap()
}

fn client(indices: Vec<usize>, params: &ParameterSet) -> ClientState {
    ClientState {
        id: 0,
        partition: Partition { client: 0, indices, source: "A".into() },
        params: params.clone(),
        master_seed: 5,
    }
}

#[test]
fn zero_local_epochs_return_global_weights() {
    let ds = data(2, 0.0);
    let spec = spec();
    let ctx = TrainingContext::new(&spec, &ds).unwrap();
    let w = init_parameters(&spec, 1).unwrap();
    let c = client((0..10).collect(), &w);
    let up = local_training(&ctx, &c, &w, 8, 0, 0.1, 0).unwrap();
    assert_eq!(up.params, w);
    assert_eq!(up.n_k, 10);
}

#[test]
fn one_full_batch_equals_one_sgd_step() {
    let ds = data(2, 0.0);
    let spec = spec();
    let ctx = TrainingContext::new(&spec, &ds).unwrap();
    let w = init_parameters(&spec, 1).unwrap();
    let indices: Vec<usize> = vec![0, 3, 5, 8, 13, 15, 19, 21];
    let c = client(indices.clone(), &w);
    let up = local_training(&ctx, &c, &w, 8, 1, 0.05, 2).unwrap();

    // oracle: replay the client's stream, build the batch by hand, one step
    let mut rng = client_rng(5, 0, 2);
    let mut order = indices.clone();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut pixels = Vec::new();
    for &i in &order {
        pixels.extend_from_slice(ds.records()[i].pixels.data());
    }
    let batch = Tensor::from_vec(&[8, SIDE, SIDE, 3], pixels).unwrap();
    let labels: Vec<usize> = order.iter().map(|&i| ds.records()[i].label).collect();
    let (_, grads) = loss_and_grad(&spec, &w, &batch, &labels, &mut rng).unwrap();
    assert_eq!(up.params, sgd_step(&w, &grads, 0.05).unwrap());
}

#[test]
fn local_training_is_deterministic() {
    let ds = data(2, 0.0);
    let spec = spec();
    let ctx = TrainingContext::new(&spec, &ds).unwrap();
    let w = init_parameters(&spec, 1).unwrap();
    let c = client((0..13).collect(), &w);
    let a = local_training(&ctx, &c, &w, 4, 2, 0.05, 3).unwrap();
    let b = local_training(&ctx, &c, &w, 4, 2, 0.05, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.params, w);
    let empty = client(vec![], &w);
    assert!(local_training(&ctx, &empty, &w, 4, 1, 0.05, 0).is_err());
}

#[test]
fn round_syncs_clients_and_advances() {
    let ds = data(4, 1.0);
    let spec = spec();
    let split = split_train_test(&ds, 0.8, 1).unwrap();
    let ctx = TrainingContext::new(&spec, &split.train).unwrap();
    let w0 = init_parameters(&spec, 2).unwrap();
    let mut state = GlobalState::new(w0.clone(), partition_by_source(&split.train, 3).unwrap(), 9).unwrap();
    let cfg = FedAvgConfig { clients: 3, lr: 0.05, ..FedAvgConfig::default() };
    let rec = state.run_round(&ctx, &cfg, &split.test, &SerialExecutor, &NullClock).unwrap();
    assert_eq!(rec.round, 1);
    assert_eq!(state.round, 1);
    assert_eq!(state.max_client_divergence(), 0.0);
    assert_ne!(state.params, w0);
    assert!((0.0..=1.0).contains(&rec.test_accuracy));
    state.run_round(&ctx, &cfg, &split.test, &SerialExecutor, &NullClock).unwrap();
    assert_eq!(state.round, 2);
}

#[test]
fn single_client_round_matches_centralized_epoch() {
    let ds = data(3, 0.0);
    let spec = spec();
    let split = split_train_test(&ds, 0.8, 1).unwrap();
    let mut cfg = ExperimentConfig::new(Topology::Centralized, spec.clone());
    cfg.rounds = 1;
    cfg.lr = 0.05;
    cfg.seed = 21;
    let cl = run_centralized(&cfg, &split.train, &split.test, &mut Runtime::serial()).unwrap();
    cfg.topology = Topology::Federated;
    let fl = run_federated(&cfg, &split.train, &split.test, &mut Runtime::serial()).unwrap();
    assert_eq!(cl.final_params, fl.final_params);
    assert_eq!(cl.records, fl.records);
}

#[test]
fn objective_is_partition_invariant() {
    let ds = data(3, 0.5);
    let spec = spec();
    let w = init_parameters(&spec, 4).unwrap();
    let all: Vec<usize> = (0..ds.len()).collect();
    let central = evaluate(&spec, &w, &ds).unwrap().mean_loss;
    for k in [1, 2, 5, 10] {
        let f = global_objective(&spec, &w, &ds, &partition_iid(&ds, k, 3).unwrap()).unwrap();
        assert!((f - central).abs() < 1e-5, "K={k}: {f} vs {central}");
    }
    let me = global_objective(&spec, &w, &ds, &partition_by_source(&ds, 4).unwrap()).unwrap();
    assert!((me - central).abs() < 1e-5);
    let single = Partition { client: 0, indices: all, source: String::new() };
    assert!((global_objective(&spec, &w, &ds, &[single]).unwrap() - central).abs() < 1e-12);
    let empty = Partition { client: 1, indices: vec![], source: String::new() };
    assert!(global_objective(&spec, &w, &ds, &[empty]).is_err());
}

#[test]
fn objective_of_perfect_model_is_zero() {
    let ds = data(1, 0.0).subset(&[0]).unwrap(); // a single class-0 record
    let spec = spec();
    let mut w = ParameterSet::zeros(&spec).unwrap();
    w.layers_mut().last_mut().unwrap().bias.data_mut()[0] = 100.0;
    let parts = partition_iid(&ds, 1, 0).unwrap();
    assert_eq!(global_objective(&spec, &w, &ds, &parts).unwrap(), 0.0);
}

#[test]
fn centralized_runs_are_reproducible_and_capped() {
    let ds = data(2, 0.0);
    let split = split_train_test(&ds, 0.8, 1).unwrap();
    let mut cfg = ExperimentConfig::new(Topology::Centralized, spec());
    cfg.rounds = 4;
    cfg.lr = 0.05;
    let a = run_centralized(&cfg, &split.train, &split.test, &mut Runtime::serial()).unwrap();
    let b = run_centralized(&cfg, &split.train, &split.test, &mut Runtime::serial()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 4);
    assert_eq!(a.stop_reason, StopReason::Cap);
    let rounds: Vec<u32> = a.records.iter().map(|r| r.round).collect();
    assert_eq!(rounds, vec![1, 2, 3, 4]);
}

#[test]
fn federated_runs_use_every_round_and_reject_single_source_client() {
    let ds = data(2, 1.0);
    let split = split_train_test(&ds, 0.8, 1).unwrap();
    let mut cfg = ExperimentConfig::new(Topology::MutuallyExclusive, spec());
    cfg.rounds = 3;
    cfg.clients = 2;
    cfg.lr = 0.05;
    let h = run_federated(&cfg, &split.train, &split.test, &mut Runtime::serial()).unwrap();
    assert_eq!(h.records.len(), 3);
    assert_eq!(h.stop_reason, StopReason::Cap);
    cfg.clients = 1;
    assert!(run_federated(&cfg, &split.train, &split.test, &mut Runtime::serial()).is_err());
    cfg.topology = Topology::Centralized;
    assert!(run_federated(&cfg, &split.train, &split.test, &mut Runtime::serial()).is_err());
}

#[test]
fn observer_sees_each_round() {
    let ds = data(2, 0.0);
    let split = split_train_test(&ds, 0.8, 1).unwrap();
    let mut cfg = ExperimentConfig::new(Topology::Federated, spec());
    cfg.rounds = 3;
    cfg.clients = 2;
    let mut seen = Vec::new();
    let mut obs = |r: &fedsim_core::federation::RoundRecord, p: &ParameterSet| seen.push((r.round, p.scalar_count()));
    let mut rt = Runtime { executor: &SerialExecutor, clock: &NullClock, observer: Some(&mut obs) };
    let h = run_federated(&cfg, &split.train, &split.test, &mut rt).unwrap();
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[2].1, h.final_params.scalar_count());
}
