use tilestream::a3c_agent::{train, PolicyParameters, TrainingConfig};
use tilestream::experiment::{run_session, Policy};
use tilestream::media_model::{quaternion_from_gaze, BitrateLadder, ChunkTimeline, ErpRect, GazePoint, TileGrid};
use tilestream::streaming_env::{EnvConfig, Session, SessionInputs};
use tilestream::trace_io::{BandwidthTrace, HeadTrace, ObjectTrackSet, TrackedBox};

fn synthetic(chunks: usize, frames: usize) -> Session {
    let cfg = EnvConfig::new(
        TileGrid::default_8x8(),
        BitrateLadder::default_six(),
        ChunkTimeline::new(1.0, chunks, frames).unwrap(),
    );
    let mut tracks = ObjectTrackSet::new();
    for f in 0..chunks * frames {
        tracks.insert(f, TrackedBox { id: 1, rect: ErpRect::new(0.6875, 0.375, 0.125, 0.125) });
        tracks.insert(f, TrackedBox { id: 2, rect: ErpRect::new(0.02, 0.8, 0.1, 0.1) });
    }
    let inputs = SessionInputs {
        bandwidth: BandwidthTrace::constant(16.0, 120.0),
        head: HeadTrace::constant(quaternion_from_gaze(GazePoint::new(0.0, 0.0)), chunks as f64, frames as f64).unwrap(),
        tracks,
        saliency: None,
    };
    Session::new(cfg, &inputs).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(800);
    let alr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.02);
    let clr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(7);

    let template = synthetic(10, 10);
    println!("class counts: {:?}", template.state().class_counts);
    let mut best_fixed = f64::NEG_INFINITY;
    for level in 0..6 {
        let mut s = template.clone();
        let (_, sum) = run_session(&mut s, &Policy::FixedLevel(level), 0).unwrap();
        println!("fixed-{level}: qoe {:.4}", sum.session_qoe);
        best_fixed = best_fixed.max(sum.session_qoe);
    }
    let net = template.network_config();
    let init = PolicyParameters::init(net, seed).unwrap();
    let cfg = TrainingConfig {
        discount: 0.99, actor_lr: alr, critic_lr: clr,
        entropy_start: 1.0, entropy_end: 0.1,
        workers: 1, episodes, grad_clip: 40.0, seed,
    };
    let t0 = std::time::Instant::now();
    let (trained, log) = train(&cfg, init, |_| Ok(template.clone())).unwrap();
    let wall = t0.elapsed();
    let mut s = template.clone();
    let (_, sum) = run_session(&mut s, &Policy::Learned(Box::new(trained)), 0).unwrap();
    let last50: f64 = log.iter().rev().take(50).map(|l| l.ret).sum::<f64>() / 50.0;
    println!("episodes {episodes} alr {alr} clr {clr} seed {seed}: trained {:.4} best_fixed {:.4} ratio {:.3} last50ret {:.3} wall {:.1?}",
        sum.session_qoe, best_fixed, sum.session_qoe / best_fixed, last50, wall);
}
