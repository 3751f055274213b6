//! JSON form of complex numbers: `{"re": x, "im": y}` or
//! `{"abs": r, "arg_rad": phi}` on input, always cartesian on output.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CartesianIn {
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolarIn {
    abs: f64,
    arg_rad: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexRepr {
    Cartesian(CartesianIn),
    Polar(PolarIn),
}

#[derive(Serialize)]
struct Cartesian {
    re: f64,
    im: f64,
}

pub fn serialize<S: Serializer>(z: &Complex64, ser: S) -> Result<S::Ok, S::Error> {
    Cartesian { re: z.re, im: z.im }.serialize(ser)
}

pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Complex64, D::Error> {
    Ok(match ComplexRepr::deserialize(de)? {
        ComplexRepr::Cartesian(CartesianIn { re, im }) => Complex64::new(re, im),
        ComplexRepr::Polar(PolarIn { abs, arg_rad }) => Complex64::from_polar(abs, arg_rad),
    })
}
