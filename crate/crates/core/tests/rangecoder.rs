use proptest::prelude::*;
use pvc_core::model::Probability;
use pvc_core::rangecoder::{decode_all, encode_all, RangeDecoder, RangeEncoder};
use pvc_core::ErrorKind;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sequence(
    bits: impl Fn(usize) -> bool,
    probs: impl Fn(usize) -> u32,
    n: usize,
) -> (Vec<bool>, Vec<Probability>) {
    let b = (0..n).map(bits).collect();
    let p = (0..n)
        .map(|i| Probability::from_quantized(probs(i)))
        .collect();
    (b, p)
}

// Payloads produced by tests/fixtures/range_coder_reference.py.
#[test]
fn golden_payload() {
    let (bits, probs) = sequence(
        |i| (i * 7 + 3) % 5 < 2,
        |i| 1 + (i as u32 * 40503) % 65535,
        32,
    );
    let payload = encode_all(&bits, &probs);
    assert_eq!(hex(&payload), "929396763d3e33");
    assert_eq!(decode_all(&payload, &probs).unwrap(), bits);
}

#[test]
fn golden_payload_with_carries() {
    let (bits, probs) = sequence(
        |i| i % 9 == 8,
        |i| if i % 9 != 8 { 60000 } else { 2000 },
        48,
    );
    let payload = encode_all(&bits, &probs);
    assert_eq!(
        hex(&payload),
        "fffffff434703dfc54e84afec0e279ff938f83bedb26762ecf00"
    );
    assert_eq!(decode_all(&payload, &probs).unwrap(), bits);
}

#[test]
fn eight_half_symbols_fit_in_one_byte_plus_flush() {
    let (bits, probs) = sequence(|i| i % 3 == 0, |_| 32768, 8);
    let payload = encode_all(&bits, &probs);
    assert!(payload.len() <= 1 + 5, "{} bytes", payload.len());
}

#[test]
fn near_certain_one() {
    let p = [Probability::from_quantized(65535)];
    let payload = encode_all(&[true], &p);
    assert_eq!(decode_all(&payload, &p).unwrap(), vec![true]);
}

#[test]
fn zero_symbols() {
    let payload = RangeEncoder::new().finish();
    assert!(payload.len() <= 8);
    let dec = RangeDecoder::new(&payload).unwrap();
    assert_eq!(dec.remaining(), 0);
    assert!(decode_all(&payload, &[]).unwrap().is_empty());
}

#[test]
fn deterministic() {
    let (bits, probs) = sequence(|i| i % 4 == 1, |i| 1000 + 97 * i as u32, 500);
    assert_eq!(encode_all(&bits, &probs), encode_all(&bits, &probs));
}

#[test]
fn truncated_payload_is_corrupt() {
    let (bits, probs) = sequence(|i| i % 2 == 0, |_| 3000, 400);
    let payload = encode_all(&bits, &probs);
    let err = decode_all(&payload[..payload.len() / 2], &probs).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Format);
}

fn message() -> impl Strategy<Value = (Vec<bool>, Vec<u32>)> {
    prop::collection::vec((any::<bool>(), 1u32..=65535), 0..600).prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip((bits, probs) in message()) {
        let probs: Vec<Probability> = probs.into_iter().map(Probability::from_quantized).collect();
        let payload = encode_all(&bits, &probs);
        let mut dec = RangeDecoder::new(&payload).unwrap();
        for (&b, &p) in bits.iter().zip(&probs) {
            prop_assert_eq!(dec.decode(p).unwrap(), b);
        }
        prop_assert_eq!(dec.remaining(), 0);
    }

    #[test]
    fn length_near_cross_entropy((bits, probs) in prop::collection::vec((any::<bool>(), 64u32..=65472), 1000..2000)
        .prop_map(|v| v.into_iter().unzip::<_, _, Vec<bool>, Vec<u32>>()))
    {
        let probs: Vec<Probability> = probs.into_iter().map(Probability::from_quantized).collect();
        let ideal: f64 = bits.iter().zip(&probs).map(|(&b, p)| p.cost_bits(b)).sum();
        let actual = 8.0 * encode_all(&bits, &probs).len() as f64;
        prop_assert!(actual <= ideal * 1.01 + 64.0, "{actual} vs {ideal}");
    }
}
