//! Shared fixtures for the benchmarks.

use imbal_core::features::{fit_vocabulary, vectorize};
use imbal_core::synth::{generate, SynthSpec};
use imbal_core::{Dataset, FeatureMatrix, NGramConfig, Representation};

/// The bundled 2,000-tweet sub-task B corpus.
pub fn corpus() -> Dataset {
    generate(&SynthSpec::task_b()).expect("valid preset")
}

/// TF-IDF matrix of `corpus` over the given n-gram range.
pub fn matrix(data: &Dataset, min_n: usize, max_n: usize) -> FeatureMatrix {
    let docs = data.token_lists();
    let vocab = fit_vocabulary(&docs, &NGramConfig::new(min_n, max_n).expect("valid range")).expect("non-empty corpus");
    vectorize(&docs, &data.class_indices(), data.task().n_classes(), &vocab, Representation::Tfidf)
        .expect("consistent shapes")
}
