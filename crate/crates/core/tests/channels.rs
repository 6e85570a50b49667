use porepath::pipeline::{run_channels, ChannelConfig, ChunkSize, Detector, EventSource, VecSource};
use porepath::{simulate, synth_model, SimulationSpec, TransitionKinetics, Variant};
use proptest::prelude::*;

fn streams(n: usize, seed: u64) -> (Detector, Vec<Vec<f64>>) {
    let model = synth_model(3, seed, 200.0, 1.0).unwrap();
    let s = (0..n)
        .map(|c| {
            let spec = SimulationSpec::new(100 + 37 * c, TransitionKinetics::default(), 9.0, seed ^ c as u64);
            simulate(&model, &spec).unwrap().events
        })
        .collect();
    (Detector::new(model, Variant::Optimized).unwrap(), s)
}

fn sources(streams: &[Vec<f64>]) -> Vec<Box<dyn EventSource>> {
    streams
        .iter()
        .enumerate()
        .map(|(i, s)| Box::new(VecSource::new(i as u32, s.clone())) as Box<dyn EventSource>)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_is_independent_of_workers_and_matches_sequential_decode(
        seed in any::<u64>(),
        n in 1usize..6,
        chunk in 2usize..80,
        workers in 2usize..9,
    ) {
        let (d, streams) = streams(n, seed);
        let cfg = ChannelConfig::new(n, 450.0, ChunkSize::Fixed(chunk)).unwrap();
        let mut one = Vec::new();
        run_channels(sources(&streams), &cfg, &d, 1, &mut one);
        let mut many = Vec::new();
        let summary = run_channels(sources(&streams), &cfg, &d, workers, &mut many);
        prop_assert_eq!(&one, &many);
        prop_assert_eq!(summary.events as usize, streams.iter().map(Vec::len).sum::<usize>());
        for (i, out) in one.iter().enumerate() {
            let seq = d.decode_stream(i as u32, &streams[i], ChunkSize::Fixed(chunk)).unwrap();
            prop_assert_eq!(out, &seq);
            prop_assert_eq!(out.path.len(), streams[i].len());
        }
    }
}
