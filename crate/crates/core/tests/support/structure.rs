//! Structural invariants over randomized small networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_snn::constraint::{init_boundaries, SynapseCell};
use sparse_snn::data::{synthetic_corpus, Split};
use sparse_snn::engine::{forward_pass, InputBatch};
use sparse_snn::network::{LayerSpec, Network, NetworkSpec, Shape3, SurrogateWindow};
use sparse_snn::pruning::{compression_rate, neuron_importance, prunable_slots, prune_step, target_dead, PruneSchedule};
use sparse_snn::regeneration::{regenerate_step, RegenState};
use sparse_snn::train::{checkpoint_load, checkpoint_save, ExperimentConfig, Mode, Trainer};
use sparse_snn::{Parameters, StructureMask};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn random_net(rng: &mut ChaCha8Rng) -> Network {
    let mut layers = Vec::new();
    let input = if rng.gen_bool(0.5) {
        let input = Shape3::new(rng.gen_range(1..=2), 6, 6);
        layers.push(LayerSpec::conv(rng.gen_range(2..=6), 3));
        if rng.gen_bool(0.5) {
            layers.push(LayerSpec::avg_pool(2));
        }
        input
    } else {
        Shape3::new(1, 1, rng.gen_range(3..=10))
    };
    for _ in 0..rng.gen_range(1..=2) {
        layers.push(LayerSpec::fc(rng.gen_range(2..=20)));
    }
    layers.push(LayerSpec::fc(rng.gen_range(2..=4)));
    let mut spec = NetworkSpec::new(input, layers);
    spec.time_steps = rng.gen_range(1..=4);
    spec.surrogate_window = SurrogateWindow::Closed;
    Network::new(spec).expect("generated spec is valid")
}

/// Random bounds, so importance scores are spread out and sometimes tied.
fn random_bounds(net: &Network, rng: &mut ChaCha8Rng) -> sparse_snn::constraint::SynapseBounds {
    let mut b = init_boundaries(&Parameters::zeros(net));
    for cells in &mut b.layers {
        for c in cells.iter_mut() {
            let r = f64::from(rng.gen_range(0..4u8)) * 0.25;
            *c = SynapseCell::with_bound(r);
        }
    }
    b
}

fn schedule(rng: &mut ChaCha8Rng) -> PruneSchedule {
    PruneSchedule {
        rho_conv: rng.gen_range(0.0..100.0),
        rho_fc: rng.gen_range(0.0..100.0),
        ..PruneSchedule::default()
    }
}

/// The pruned count of every prunable layer reaches `floor(rho% of units)`
/// (at most `units - 1`), the killed units are the least important
/// retained ones, and compression never drops.
pub fn check_prune_counts(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let net = random_net(&mut rng);
        let bounds = random_bounds(&net, &mut rng);
        let mut mask = StructureMask::all_alive(&net);
        for _round in 0..3 {
            let sched = schedule(&mut rng);
            let importance: Vec<Vec<f64>> =
                (0..net.weighted_count()).map(|s| neuron_importance(&bounds, &mask, s)).collect();
            let before = mask.clone();
            let c_before = compression_rate(&mask);
            prune_step(&net, &importance, &mut mask, &sched).map_err(err)?;
            ensure!(compression_rate(&mask) >= c_before, "case {case}: compression dropped after pruning");
            for slot in prunable_slots(&net) {
                let units = net.layouts()[slot].units;
                let had = units - before.layers[slot].retained_units();
                let want = target_dead(sched.rate_for(&net, slot), units).min(units - 1).max(had);
                let now = units - mask.layers[slot].retained_units();
                ensure!(now == want, "case {case} layer {slot}: {now} pruned, expected {want}");

                let mut order: Vec<usize> = (0..units).filter(|&u| !before.layers[slot].unit_pruned[u]).collect();
                let d = &importance[slot];
                order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap().then(a.cmp(&b)));
                for (k, &u) in order.iter().enumerate() {
                    let killed = mask.layers[slot].unit_pruned[u];
                    ensure!(killed == (k < want - had), "case {case} layer {slot}: unit {u} chosen wrongly");
                    if killed {
                        ensure!(
                            mask.layers[slot].unit_synapses(u).iter().all(|&a| !a),
                            "case {case} layer {slot}: pruned unit {u} kept a synapse"
                        );
                    }
                }
            }
            let out = net.output_slot();
            ensure!(mask.layers[out] == before.layers[out], "case {case}: readout touched");
        }
    }
    Ok(())
}

/// Dead units never spike, even with biases and weights that would make
/// them fire.
pub fn check_dead_silence(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for case in 0..cases {
        let net = random_net(&mut rng);
        let mut params = Parameters::init(&net, &mut rng);
        for l in &mut params.layers {
            l.weights.iter_mut().for_each(|w| *w = w.abs() * 4.0);
            l.bias.iter_mut().for_each(|b| *b = 1.0);
        }
        let mut mask = StructureMask::all_alive(&net);
        let mut dead = Vec::new();
        for slot in prunable_slots(&net) {
            for u in 0..net.layouts()[slot].units {
                if rng.gen_bool(0.4) {
                    mask.kill_unit(slot, u);
                    dead.push((slot, u));
                }
            }
        }
        let spec = net.spec();
        let n = rng.gen_range(1..=3);
        let data = (0..n * spec.time_steps * spec.input_shape.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let batch = InputBatch::new(n, spec.time_steps, spec.input_shape, data).map_err(err)?;
        let (states, _) = forward_pass(&net, &params, &mask, &batch).map_err(err)?;

        // Trace index of each weighted layer among the non-readout layers.
        let trace_of: Vec<usize> =
            spec.layers.iter().enumerate().filter(|(_, l)| l.is_weighted()).map(|(i, _)| i).collect();
        for &(slot, u) in &dead {
            let units = net.layouts()[slot].units;
            for s in 0..n {
                for t in 0..spec.time_steps {
                    let x = states.spikes(trace_of[slot], s, t);
                    let per = x.len() / units;
                    ensure!(
                        x[u * per..(u + 1) * per].iter().all(|&v| v == 0.0),
                        "case {case}: dead unit {u} of layer {slot} spiked"
                    );
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// Revived synapses come back at weight zero on an alive unit, nothing
/// else changes, and compression never rises.
pub fn check_regeneration(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut revived_total = 0;
    for case in 0..cases {
        let net = random_net(&mut rng);
        let mut params = Parameters::init(&net, &mut rng);
        let mut mask = StructureMask::all_alive(&net);
        for slot in prunable_slots(&net) {
            for u in 0..net.layouts()[slot].units - 1 {
                if rng.gen_bool(0.5) {
                    mask.kill_unit(slot, u);
                }
            }
        }
        // Stale weights under the mask, which revival has to overwrite.
        for l in &mut params.layers {
            l.weights.iter_mut().for_each(|w| *w += 0.5);
        }
        let t_num = rng.gen_range(1..=3);
        let mut state = RegenState::new(rng.gen_range(1.0..99.0), 1.1, t_num, &mask);
        state.release_pruned = rng.gen_bool(0.5);
        for round in 0..t_num + 3 {
            let mut grads = Parameters::zeros(&net);
            for l in &mut grads.layers {
                l.weights.iter_mut().for_each(|g| *g = if rng.gen_bool(0.8) { rng.gen_range(-1.0..1.0) } else { 0.0 });
            }
            let before_mask = mask.clone();
            let before = params.clone();
            let c_before = compression_rate(&mask);
            let report = regenerate_step(&grads, &mut mask, &mut state, &mut params).map_err(err)?;
            ensure!(compression_rate(&mask) <= c_before, "case {case} round {round}: compression rose");
            let mut revived = 0;
            for (slot, lm) in mask.layers.iter().enumerate() {
                let bl = &before_mask.layers[slot];
                for i in 0..lm.syn_alive.len() {
                    let w = params.layers[slot].weights[i];
                    if lm.syn_alive[i] && !bl.syn_alive[i] {
                        revived += 1;
                        ensure!(w == 0.0, "case {case}: revived synapse {slot}/{i} has weight {w}");
                        ensure!(lm.unit_alive[lm.unit_of(i)], "case {case}: revived synapse on a dead unit");
                        ensure!(grads.layers[slot].weights[i] != 0.0, "case {case}: zero gradient revived");
                    } else {
                        ensure!(lm.syn_alive[i] == bl.syn_alive[i], "case {case}: synapse {slot}/{i} died");
                        ensure!(w == before.layers[slot].weights[i], "case {case}: untouched weight changed");
                    }
                }
                if !state.release_pruned {
                    ensure!(lm.unit_pruned == bl.unit_pruned, "case {case}: pruned set changed");
                }
            }
            ensure!(revived == report.total_revived(), "case {case}: report disagrees with mask");
            revived_total += revived;
        }
    }
    Ok(revived_total)
}

fn tiny_config(rng: &mut ChaCha8Rng) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    let pairs = [
        ("network.arch", "Input-3C3-AvgPool2-12FC-3FC"),
        ("network.time_steps", "3"),
        ("data.train_samples", "36"),
        ("data.test_samples", "12"),
        ("data.classes", "3"),
        ("data.shape", "1x8x8"),
        ("train.epochs", "7"),
        ("train.batch_size", "8"),
        ("prune.start", "2"),
        ("prune.mid", "4"),
        ("t_num", "1"),
    ];
    for (k, v) in pairs {
        cfg.set(k, v).expect("valid test setting");
    }
    cfg.seed = rng.gen();
    cfg.mode = [Mode::Full, Mode::NoRegeneration, Mode::ConstraintOnly, Mode::Baseline][rng.gen_range(0..4)];
    cfg.rho_fc = rng.gen_range(20.0..60.0);
    cfg
}

/// A run interrupted at a random epoch, checkpointed to disk and resumed
/// ends in exactly the same state as the uninterrupted run. Returns the
/// number of runs that pruned and the number that regenerated.
pub fn check_resume(cases: usize, seed: u64) -> Result<(usize, usize), String> {
    let (mut pruned, mut regrown) = (0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = tempfile::tempdir().map_err(err)?;
    for case in 0..cases {
        let cfg = tiny_config(&mut rng);
        let train = synthetic_corpus(cfg.seed, 36, Shape3::new(1, 8, 8), 3, Split::Train).map_err(err)?;
        let test = synthetic_corpus(cfg.seed ^ 1, 12, Shape3::new(1, 8, 8), 3, Split::Test).map_err(err)?;

        let mut whole = Trainer::with_data(cfg.clone(), train.clone(), test.clone()).map_err(err)?;
        while !whole.is_finished() {
            whole.run_epoch().map_err(err)?;
        }

        let stop = rng.gen_range(1..cfg.epochs);
        let mut first = Trainer::with_data(cfg.clone(), train.clone(), test.clone()).map_err(err)?;
        for _ in 0..stop {
            first.run_epoch().map_err(err)?;
        }
        let path = dir.path().join(format!("case{case}.bin"));
        checkpoint_save(first.state(), &path).map_err(err)?;
        drop(first);
        let mut second = Trainer::resume_with_data(checkpoint_load(&path).map_err(err)?, train, test).map_err(err)?;
        while !second.is_finished() {
            second.run_epoch().map_err(err)?;
        }

        let (mut a, mut b) = (whole.into_state(), second.into_state());
        for m in a.metrics.iter_mut().chain(b.metrics.iter_mut()) {
            m.wall_seconds = 0.0;
        }
        ensure!(a == b, "case {case} ({}, stop {stop}): resumed state differs", cfg.mode.as_str());
        pruned += usize::from(a.metrics.last().is_some_and(|m| m.compression > 0.0));
        regrown += usize::from(a.metrics.iter().any(|m| m.revived > 0));
    }
    Ok((pruned, regrown))
}
