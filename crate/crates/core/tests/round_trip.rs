use porepath::formats::{read_events_binary, write_events_binary};
use porepath::pipeline::{ChunkSize, Detector};
use porepath::{simulate, synth_model, SimulationSpec, TransitionKinetics, Variant, DEFAULT_LEVEL_SPREAD};

const CHUNKS: [ChunkSize; 3] = [ChunkSize::Fixed(32), ChunkSize::Fixed(512), ChunkSize::Whole];

fn detector(seed: u64) -> Detector {
    let model = synth_model(3, seed, DEFAULT_LEVEL_SPREAD, 1.0).unwrap();
    Detector::new(model, Variant::Optimized).unwrap()
}

#[test]
fn noiseless_step_walks_decode_to_the_true_read() {
    let d = detector(7);
    for seed in 0..40 {
        let spec = SimulationSpec::new(600, TransitionKinetics::step_only(), f64::INFINITY, seed);
        let truth = simulate(d.model(), &spec).unwrap();
        // Through the 32-bit event file, as the CLI does.
        let mut buf = Vec::new();
        write_events_binary(&mut buf, 0, &truth.events).unwrap();
        let events = read_events_binary(&buf[..]).unwrap().events;
        assert_eq!(events, truth.events);
        for chunk in CHUNKS {
            let out = d.decode_stream(0, &events, chunk).unwrap();
            assert_eq!(out.path.states, truth.true_states, "seed {seed} chunk {chunk}");
            assert_eq!(out.read.bases, truth.bases, "seed {seed} chunk {chunk}");
            assert!(!out.read.has_junction_break());
        }
    }
}

#[test]
fn noiseless_default_walks_recover_every_state() {
    let d = detector(3);
    for seed in 0..40 {
        let spec = SimulationSpec::new(600, TransitionKinetics::default(), f64::INFINITY, seed);
        let truth = simulate(d.model(), &spec).unwrap();
        for chunk in CHUNKS {
            let out = d.decode_stream(0, &truth.events, chunk).unwrap();
            assert_eq!(out.path.states, truth.true_states, "seed {seed} chunk {chunk}");
        }
    }
}

#[test]
fn reference_and_optimized_agree_on_noisy_streams() {
    let model = synth_model(4, 2, DEFAULT_LEVEL_SPREAD, 1.0).unwrap();
    let r = Detector::new(model.clone(), Variant::Reference).unwrap();
    let o = Detector::new(model, Variant::Optimized).unwrap();
    for seed in 0..10 {
        let spec = SimulationSpec::new(800, TransitionKinetics::default(), 6.0, seed);
        let truth = simulate(r.model(), &spec).unwrap();
        for chunk in CHUNKS {
            assert_eq!(
                r.decode_stream(0, &truth.events, chunk).unwrap(),
                o.decode_stream(0, &truth.events, chunk).unwrap()
            );
        }
    }
}
