use cepclust::clustering::{compute_matrix, cut, hierarchical_cluster, Linkage, Measure, MeasureConfig};
use cepclust::distances::{cepstral_distance, extended_cepstral_distance};
use cepclust::evaluation::adjusted_rand_index;
use cepclust::io;
use cepclust::lti::{paper_circuits, simulate, Discretization, DEFAULT_CIRCUIT_DT};
use cepclust::rng::rng_from_seed;
use cepclust::signal::{
    build_paper_dataset, gen_multisine, gen_white_noise, IOPair, InputCounts, MultisineComponent,
    TimeSeries,
};
use cepclust::spectral::WelchConfig;
use cepclust::Execution;

fn through(system: usize, u: TimeSeries) -> IOPair {
    let systems = paper_circuits(DEFAULT_CIRCUIT_DT, Discretization::Bilinear).unwrap();
    let y = simulate(&systems[system], &u).unwrap();
    IOPair::new(0, u, y).unwrap()
}

#[test]
fn same_circuit_different_inputs_stay_close() {
    let n = 1 << 12;
    let cfg = WelchConfig::for_length(n);
    let comps = MultisineComponent::random_set(&mut rng_from_seed(3));
    let ms = gen_multisine(n, &comps, 0.1, 4).unwrap();
    let wn = gen_white_noise(n, 1.0, 5).unwrap();
    let s1_ms = through(0, ms.clone());
    let s1_wn = through(0, wn.clone());
    let s2_ms = through(1, ms);
    let s2_wn = through(1, wn);
    let same = extended_cepstral_distance(&s1_ms, &s1_wn, &cfg).unwrap();
    let cross_ms = extended_cepstral_distance(&s1_ms, &s2_ms, &cfg).unwrap();
    let cross_wn = extended_cepstral_distance(&s1_wn, &s2_wn, &cfg).unwrap();
    assert!(5.0 * same <= cross_ms.min(cross_wn), "same {same} cross {cross_ms} {cross_wn}");
}

#[test]
fn white_noise_inputs_make_both_cepstral_distances_agree() {
    let n = 1 << 12;
    let cfg = WelchConfig::for_length(n);
    let p1 = through(0, gen_white_noise(n, 1.0, 8).unwrap());
    let p2 = through(1, gen_white_noise(n, 1.0, 9).unwrap());
    let ext = extended_cepstral_distance(&p1, &p2, &cfg).unwrap();
    let orig = cepstral_distance(p1.output(), p2.output(), &cfg).unwrap();
    assert!((ext - orig).abs() / (ext + 1e-9) <= 0.2, "ext {ext} orig {orig}");
}

#[test]
fn file_round_trip_reproduces_in_process_results() {
    let systems = paper_circuits(DEFAULT_CIRCUIT_DT, Discretization::Bilinear).unwrap();
    let ds = build_paper_dataset(1 << 10, InputCounts::new(4, 2, 2), &systems, 12).unwrap();
    let mut series = Vec::new();
    io::write_series_csv(ds.pairs(), &mut series).unwrap();
    let manifest = io::Manifest::for_dataset(&ds, DEFAULT_CIRCUIT_DT, 12, serde_json::json!({}));
    let loaded = io::Manifest::from_json(&manifest.to_json().unwrap())
        .unwrap()
        .attach(io::read_series_csv(series.as_slice(), DEFAULT_CIRCUIT_DT).unwrap())
        .unwrap();
    assert_eq!(loaded, ds);

    let cfg = MeasureConfig::default();
    let direct = compute_matrix(Measure::ExtendedCepstral, &ds, &cfg, Execution::Parallel).unwrap();
    let from_file = compute_matrix(Measure::ExtendedCepstral, &loaded, &cfg, Execution::Parallel).unwrap();
    let mut buf = Vec::new();
    io::write_matrix_csv(&from_file, &mut buf).unwrap();
    let reread = io::read_matrix_csv(buf.as_slice()).unwrap();
    assert_eq!(reread, direct);

    let partition = cut(&hierarchical_cluster(&reread, Linkage::Average), 2).unwrap();
    assert_eq!(adjusted_rand_index(partition.labels(), ds.labels()).unwrap(), 1.0);
}

#[test]
fn unequal_lengths_are_rejected_only_where_the_measure_requires_it() {
    let a = through(0, gen_white_noise(512, 1.0, 1).unwrap());
    let b = through(0, gen_white_noise(640, 1.0, 2).unwrap());
    let ds = cepclust::signal::LabeledDataset::new(vec![a, b], vec![0, 0]).unwrap();
    let cfg = MeasureConfig::default();
    for m in [Measure::Euclidean, Measure::KeoghLb] {
        let err = compute_matrix(m, &ds, &cfg, Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }
    assert!(compute_matrix(Measure::Cepstral, &ds, &cfg, Execution::Sequential).is_ok());
    assert!(compute_matrix(Measure::ExtendedCepstral, &ds, &cfg, Execution::Sequential).is_ok());
}
