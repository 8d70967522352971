//! Scratch experiment harness (deleted before finalizing).

use gapweld::candidates::candidate_groups;
use gapweld::eval::{
    default_threshold_grid, sliding_eval, sweep, BaselineDistanceScorer, EvalOptions, NativeScorer,
};
use gapweld::gap::{make_gap_instance, GapInstance, GapSpec, TruthPair};
use gapweld::pointcloud::{build_dataset, Dataset, ExampleRequest, RepConfig};
use gapweld::scoring::{init_scorer, train, ScorerParams, TrainConfig};
use gapweld::synth::{generate_volume, SynthConfig};
use gapweld::volume::LabelVolume;
use std::time::Instant;

fn scale_bound(dims: (usize, usize, usize), res: (f64, f64, f64), cs: usize, ns: usize) -> f64 {
    (dims.0 as f64 * res.0)
        .max(dims.1 as f64 * res.1)
        .max((2 * cs + ns) as f64 * res.2)
}

fn training_dataset(
    volumes: &[LabelVolume],
    ns: usize,
    cs: usize,
    np: usize,
    scale: f64,
    positions_step: usize,
    seed: u64,
) -> Dataset {
    let mut insts: Vec<GapInstance> = Vec::new();
    for gt in volumes {
        let zdim = gt.dims().2;
        let mut z0 = 1;
        while z0 + ns < zdim {
            insts.push(make_gap_instance(gt, GapSpec::new(z0, ns)).unwrap());
            z0 += positions_step;
        }
    }
    let mut requests = Vec::new();
    for inst in &insts {
        for g in candidate_groups(inst, 4).unwrap() {
            for c in &g.candidates {
                let label = inst.truth_pairs.contains(&TruthPair {
                    top_fragment: g.top,
                    bottom_fragment: c.bottom,
                });
                requests.push(ExampleRequest {
                    inst,
                    top: g.top,
                    bottom: c.bottom,
                    label: Some(u8::from(label)),
                });
            }
        }
    }
    let cfg = RepConfig {
        cs,
        np,
        norm_scale_nm: scale,
        seed,
    };
    build_dataset(&requests, &cfg).unwrap()
}

fn accuracy(params: &ScorerParams, ds: &Dataset) -> f64 {
    let table = gapweld::scoring::score_native(params, ds).unwrap();
    let mut correct = 0;
    for (row, ex) in table.rows.iter().zip(&ds.examples) {
        let pred = u8::from(row.p_merge > 0.5);
        if pred == ex.label.unwrap() {
            correct += 1;
        }
    }
    correct as f64 / ds.examples.len() as f64
}

fn mixed_ns_dataset(
    volumes: &[LabelVolume],
    ns_values: &[usize],
    cs: usize,
    np: usize,
    scale: f64,
    positions_step: usize,
    seed: u64,
) -> Dataset {
    let mut insts: Vec<GapInstance> = Vec::new();
    for gt in volumes {
        for &ns in ns_values {
            let zdim = gt.dims().2;
            let mut z0 = 1;
            while z0 + ns < zdim {
                insts.push(make_gap_instance(gt, GapSpec::new(z0, ns)).unwrap());
                z0 += positions_step;
            }
        }
    }
    let mut requests = Vec::new();
    for inst in &insts {
        for g in candidate_groups(inst, 4).unwrap() {
            for c in &g.candidates {
                let label = inst.truth_pairs.contains(&TruthPair {
                    top_fragment: g.top,
                    bottom_fragment: c.bottom,
                });
                requests.push(ExampleRequest {
                    inst,
                    top: g.top,
                    bottom: c.bottom,
                    label: Some(u8::from(label)),
                });
            }
        }
    }
    let cfg = RepConfig {
        cs,
        np,
        norm_scale_nm: scale,
        seed,
    };
    build_dataset(&requests, &cfg).unwrap()
}

fn oblique(seed: u64) -> LabelVolume {
    generate_volume(&SynthConfig {
        dims: (64, 64, 20),
        resolution_nm: (4.0, 4.0, 8.0),
        n_tubes: 28,
        radius_vox: (1.2, 2.0),
        max_angle_deg: 65.0,
        wobble: 0.3,
        seed: seed,
    })
    .unwrap()
}

#[test]
#[ignore]
fn oblique_train_tuning() {
    let t0 = Instant::now();
    let cs = 3;
    let np = 256;
    let ns = 2usize;
    let dims = (64, 64, 20);
    let res = (4.0, 4.0, 8.0);
    let scale = scale_bound(dims, res, cs, 6);

    let train_vols = [oblique(1001), oblique(1002)];
    let eval_vol = oblique(2001);

    for (epochs, lr, batch, step) in [
        (60usize, 0.01f64, 2usize, 3usize),
        (100, 0.003, 2, 3),
        (100, 0.01, 2, 3),
        (60, 0.003, 1, 3),
    ] {
        let ds = mixed_ns_dataset(&train_vols, &[ns], cs, np, scale, step, 77);
        let t1 = Instant::now();
        let cfg = TrainConfig {
            epochs,
            learning_rate: lr,
            batch_size: batch,
            seed: 5,
        };
        let (params, history) = train(&init_scorer(2), &ds, &cfg).unwrap();
        let acc = accuracy(&params, &ds);
        let mut opts = EvalOptions::new(RepConfig {
            cs,
            np,
            norm_scale_nm: scale,
            seed: 77,
        });
        opts.jobs = 2;
        let nat = sweep(
            &eval_vol,
            ns,
            &NativeScorer { params },
            &default_threshold_grid(),
            &opts,
        )
        .unwrap();
        let best = nat.rows.iter().find(|r| r.optimal).unwrap();
        println!(
            "epochs={epochs} lr={lr} batch={batch} step={step} [{} ex, loss {:.3}->{:.3}, acc {acc:.3}, {:?}]: native t={} red={:.2} succ={:.3} err={:.3}",
            ds.examples.len(),
            history[0],
            history.last().unwrap(),
            t1.elapsed(),
            best.threshold,
            best.percent_reduction,
            best.success_rate,
            best.error_rate
        );
    }
    println!("total {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn oblique_fixture_trend() {
    let t0 = Instant::now();
    let cs = 3;
    let np = 256;
    let ns_values = [1usize, 2, 4, 6];
    let dims = (64, 64, 20);
    let res = (4.0, 4.0, 8.0);
    let scale = scale_bound(dims, res, cs, 6);
    println!("scale: {scale}");

    let train_vols = [oblique(1001), oblique(1002)];
    let eval_vol = oblique(2001);

    for &ns in &ns_values {
        let ds = mixed_ns_dataset(&train_vols, &[ns], cs, np, scale, 3, 77);
        let positives = ds.examples.iter().filter(|e| e.label == Some(1)).count();
        let t1 = Instant::now();
        let cfg = TrainConfig {
            epochs: 60,
            learning_rate: 0.003,
            batch_size: 2,
            seed: 5,
        };
        let (params, history) = train(&init_scorer(2), &ds, &cfg).unwrap();
        let acc = accuracy(&params, &ds);
        let native = NativeScorer { params };

        let mut opts = EvalOptions::new(RepConfig {
            cs,
            np,
            norm_scale_nm: scale,
            seed: 77,
        });
        opts.jobs = 2;
        let base = sweep(
            &eval_vol,
            ns,
            &BaselineDistanceScorer,
            &default_threshold_grid(),
            &opts,
        )
        .unwrap();
        let nat = sweep(&eval_vol, ns, &native, &default_threshold_grid(), &opts).unwrap();
        let best = |t: &gapweld::eval::SweepTable| {
            t.rows
                .iter()
                .find(|r| r.optimal)
                .map(|r| (r.threshold, r.percent_reduction, r.success_rate, r.error_rate))
                .unwrap()
        };
        let (bt, br, bs, be) = best(&base);
        let (nt, nr, nsucc, ne) = best(&nat);
        println!(
            "ns={ns}: [{} ex, {} pos, loss {:.3}->{:.3}, acc {acc:.3}, {:?}] baseline t={bt} red={br:.2} succ={bs:.3} err={be:.3} | native t={nt} red={nr:.2} succ={nsucc:.3} err={ne:.3}",
            ds.examples.len(),
            positives,
            history[0],
            history.last().unwrap(),
            t1.elapsed()
        );
    }
    println!("total {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn parallel_fixture_training() {
    let t0 = Instant::now();
    let dims = (64, 64, 32);
    let res = (4.0, 4.0, 40.0);
    let mk = |seed: u64| {
        generate_volume(&SynthConfig {
            dims,
            resolution_nm: res,
            n_tubes: 20,
            radius_vox: (1.5, 3.0),
            max_angle_deg: 10.0,
            wobble: 0.0,
            seed,
        })
        .unwrap()
    };
    let train_vol = mk(101);
    let eval_vol = mk(202);
    let ns = 1;
    let cs = 3;
    let np = 512;
    let scale = scale_bound(dims, res, cs, ns);
    println!("scale bound: {scale}");

    let ds = training_dataset(&[train_vol], ns, cs, np, scale, 1, 7);
    let positives = ds.examples.iter().filter(|e| e.label == Some(1)).count();
    println!(
        "dataset: {} examples ({} positive) in {:?}",
        ds.examples.len(),
        positives,
        t0.elapsed()
    );

    for batch_size in [1usize, 2, 4] {
        let t1 = Instant::now();
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 0.001,
            batch_size,
            seed: 3,
        };
        let (params, history) = train(&init_scorer(1), &ds, &cfg).unwrap();
        println!(
            "batch {batch_size}: train 50 epochs in {:?}; loss {} -> {}; acc {}",
            t1.elapsed(),
            history[0],
            history.last().unwrap(),
            accuracy(&params, &ds)
        );

        let t2 = Instant::now();
        let mut opts = EvalOptions::new(RepConfig {
            cs,
            np,
            norm_scale_nm: scale,
            seed: 7,
        });
        opts.jobs = 2;
        let table = sweep(
            &eval_vol,
            ns,
            &NativeScorer { params },
            &default_threshold_grid(),
            &opts,
        )
        .unwrap();
        for r in &table.rows {
            println!(
                "  t={} red={:.2} succ={:.3} err={:.3} {}",
                r.threshold,
                r.percent_reduction,
                r.success_rate,
                r.error_rate,
                if r.optimal { "*" } else { "" }
            );
        }
        println!("  sweep in {:?}", t2.elapsed());
    }

    let opts = EvalOptions::new(RepConfig {
        cs,
        np,
        norm_scale_nm: scale,
        seed: 7,
    });
    let base = sliding_eval(&eval_vol, ns, &BaselineDistanceScorer, 0.5, &opts).unwrap();
    println!(
        "baseline: red={:.2} succ={} err={}",
        base.percent_reduction, base.merge_success_rate, base.merge_error_rate
    );
    println!("total {:?}", t0.elapsed());
}
