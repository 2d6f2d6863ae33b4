use std::path::Path;

use hartree::io::{decode, encode, read_field, read_field_on, write_field};
use hartree::{Complex, Error, Field32, Field64, Grid32, Grid64};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn any_field() -> impl Strategy<Value = Field64> {
    (
        1usize..=3,
        prop::sample::select(vec![4usize, 6, 8]),
        0.01f64..1e4,
    )
        .prop_flat_map(|(dim, n, l)| {
            prop::collection::vec((finite(), finite()), n.pow(dim as u32)).prop_map(move |raw| {
                let grid = Grid64::new(dim, n, l).unwrap();
                Field64::new(
                    grid,
                    raw.into_iter().map(|(a, b)| Complex::new(a, b)).collect(),
                )
                .unwrap()
            })
        })
}

fn bits(u: &Field64) -> Vec<(u64, u64)> {
    u.values()
        .iter()
        .map(|c| (c.re.to_bits(), c.im.to_bits()))
        .collect()
}

proptest! {
    #[test]
    fn roundtrip_is_bitwise(u in any_field()) {
        let back: Field64 = decode(&encode(&u), Path::new("mem")).unwrap();
        prop_assert_eq!(back.grid(), u.grid());
        prop_assert_eq!(bits(&back), bits(&u));
    }

    #[test]
    fn every_short_prefix_is_truncated(u in any_field(), cut in 0.0f64..1.0) {
        let bytes = encode(&u);
        let keep = (cut * bytes.len() as f64) as usize;
        let err = decode::<f64>(&bytes[..keep], Path::new("mem")).unwrap_err();
        prop_assert!(matches!(err, Error::Truncated { .. }), "{err}");
    }
}

#[test]
fn file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.hwf");
    let u = Field64::from_fn(Grid64::new(2, 8, 3.0).unwrap(), |x| {
        Complex::new(x[0], -x[1])
    })
    .unwrap();
    write_field(&u, &path).unwrap();
    let back: Field64 = read_field(&path).unwrap();
    assert_eq!(back, u);
}

#[test]
fn f32_fields_are_stored_as_f64() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.hwf");
    let u = Field32::gaussian(Grid32::new(1, 16, 8.0).unwrap(), 1.0).unwrap();
    write_field(&u, &path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 + 12 + 16 * 16);
    let back: Field32 = read_field(&path).unwrap();
    assert_eq!(back, u);
}

#[test]
fn bad_magic() {
    let u = Field64::zeros(Grid64::new(1, 4, 1.0).unwrap());
    let mut bytes = encode(&u);
    bytes[3] = b'2';
    assert!(matches!(
        decode::<f64>(&bytes, Path::new("m")),
        Err(Error::Format { .. })
    ));
}

#[test]
fn trailing_bytes_are_rejected() {
    let u = Field64::zeros(Grid64::new(1, 4, 1.0).unwrap());
    let mut bytes = encode(&u);
    bytes.push(0);
    assert!(matches!(
        decode::<f64>(&bytes, Path::new("m")),
        Err(Error::Truncated { .. })
    ));
}

#[test]
fn non_finite_payload_is_rejected() {
    let u = Field64::zeros(Grid64::new(1, 4, 1.0).unwrap());
    let mut bytes = encode(&u);
    let at = bytes.len() - 8;
    bytes[at..].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(decode::<f64>(&bytes, Path::new("m")).is_err());
}

#[test]
fn read_on_mismatched_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.hwf");
    let g = Grid64::new(1, 16, 10.0).unwrap();
    write_field(&Field64::zeros(g.clone()), &path).unwrap();
    assert!(read_field_on(&path, &g).is_ok());
    let other = Grid64::new(1, 16, 12.0).unwrap();
    assert!(matches!(
        read_field_on(&path, &other),
        Err(Error::GridMismatch(_))
    ));
    let other = Grid64::new(1, 32, 10.0).unwrap();
    assert!(matches!(
        read_field_on(&path, &other),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn missing_file_is_io() {
    let err = read_field::<f64>("/nonexistent/dir/u.hwf").unwrap_err();
    assert!(err.is_io() && !err.is_config());
}
