//! Live encoder against hidden states dumped from the reference
//! implementation for two tiny random-weight models (see
//! fixtures/wav2vec2/make_fixture.py).

use std::path::PathBuf;

use cogscreen::embeddings::{expected_frames, extract_layer_states, EmbeddingBackend, Wav2Vec2Backend, WindowInput};
use ndarray::Array2;
use safetensors::SafeTensors;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wav2vec2").join(name)
}

fn reference(name: &str) -> (Vec<f32>, Vec<Array2<f32>>) {
    let bytes = std::fs::read(fixture(name).join("reference.safetensors")).unwrap();
    let st = SafeTensors::deserialize(&bytes).unwrap();
    let floats = |key: &str| -> (Vec<usize>, Vec<f32>) {
        let t = st.tensor(key).unwrap();
        let v = t.data().chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        (t.shape().to_vec(), v)
    };
    let input = floats("input").1;
    let mut states = Vec::new();
    for i in 0.. {
        let key = format!("hidden_{i}");
        if st.tensor(&key).is_err() {
            break;
        }
        let (shape, data) = floats(&key);
        states.push(Array2::from_shape_vec((shape[0], shape[1]), data).unwrap());
    }
    (input, states)
}

fn check(name: &str) {
    let model = Wav2Vec2Backend::load(&fixture(name)).unwrap();
    let (input, expected) = reference(name);
    assert_eq!(expected.len(), model.num_layers() + 1);
    let got = model.hidden_states(&input, model.num_layers());
    for (layer, (g, e)) in got.iter().zip(&expected).enumerate() {
        assert_eq!(g.dim(), e.dim(), "{name} layer {layer}");
        let worst = g.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst < 2e-4, "{name} layer {layer}: max abs diff {worst}");
    }
}

#[test]
fn post_norm_model_matches_reference() {
    check("post_ln");
}

#[test]
fn stable_norm_model_with_legacy_weight_norm_names_matches_reference() {
    check("stable_ln");
}

#[test]
fn frame_contract_and_determinism() {
    let model = Wav2Vec2Backend::load(&fixture("post_ln")).unwrap();
    assert_eq!(model.frame_stride_s(), 0.02);
    for seconds in [0.04, 0.5, 1.0, 2.5] {
        let x: Vec<f32> = (0..(seconds * 16_000.0) as usize).map(|i| (i as f32 * 0.07).sin() * 0.2).collect();
        let input = WindowInput { samples: &x, sample_rate: 16_000, source: "r", start_s: 0.0, end_s: seconds };
        let a = extract_layer_states(&model, &input).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|m| m.dim() == (expected_frames(seconds), 32)));
        let b = extract_layer_states(&model, &input).unwrap();
        assert_eq!(a, b);
        assert_eq!(model.extract_layer(&input, 2).unwrap(), a[1]);
    }
}
