//! Shared fixtures for the criterion benches.

use rvtdcnn::dataset::{build_dataset, joint_normalize, Dataset};
use rvtdcnn::network::{Rvtdcnn, RvtdcnnArch};
use rvtdcnn::{default_pa, generate_ofdm, ComplexSeq, OfdmConfig};

/// A short drive, enough for a few thousand dataset entries.
pub fn short_signal() -> ComplexSeq {
    generate_ofdm(&OfdmConfig {
        n_symbols: 40,
        ..OfdmConfig::default()
    })
    .expect("default signal config is valid")
}

/// Forward-modeling task on the default amplifier with a freshly initialized network.
pub fn modeling_task(count: usize) -> (Rvtdcnn, Dataset, Dataset) {
    let x = short_signal();
    let y = rvtdcnn::pa_forward(&default_pa(0).expect("seed 0 builds"), &x).expect("transmit");
    let (xn, yn, _) = joint_normalize(&x, &y).expect("non-zero");
    let (train, test) = build_dataset(&xn, &yn, 3, count, 0).expect("signal long enough");
    let net = Rvtdcnn::init(RvtdcnnArch::default(), 0).expect("default arch");
    (net, train, test)
}
