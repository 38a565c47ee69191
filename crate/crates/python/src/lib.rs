use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use veerkit::certify::{self, Certificate};
use veerkit::flatsurf;
use veerkit::geometry::{self, Classification};
use veerkit::homology;
use veerkit::triangulation::{isomorphism_signature, IdealTriangulation, TriangulationJson};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse(tri_json: &str) -> PyResult<IdealTriangulation> {
    let json: TriangulationJson = serde_json::from_str(tri_json).map_err(err)?;
    json.to_triangulation().map_err(err)
}

/// Veering triangulation of the punctured-torus bundle of an `R`/`L` word, as JSON.
#[pyfunction]
fn ptorus_bundle(word: &str) -> PyResult<String> {
    let (tri, v) = flatsurf::ptorus_bundle(word).map_err(err)?;
    Ok(veerkit::cli::triangulation_json(&tri, Some(&v)))
}

#[pyfunction]
fn signature(tri_json: &str) -> PyResult<String> {
    Ok(isomorphism_signature(&parse(tri_json)?))
}

#[pyfunction]
fn tet_count(tri_json: &str) -> PyResult<usize> {
    Ok(parse(tri_json)?.tet_count())
}

/// Shapes, volume and classification (`"geometric"`, `"nongeometric"`, `"flat"`).
#[pyfunction]
#[pyo3(signature = (tri_json, seed = 0, tol = 1e-9))]
fn solve(tri_json: &str, seed: u64, tol: f64) -> PyResult<(Vec<Complex64>, f64, &'static str)> {
    let tri = parse(tri_json)?;
    let sys = geometry::assemble_for(&tri).map_err(err)?;
    let s = geometry::solve(&sys, None, seed).map_err(err)?;
    let vol = geometry::volume(&s.shapes).map_err(err)?;
    let class = match geometry::classify(&s.shapes, tol) {
        Classification::Geometric => "geometric",
        Classification::NonGeometric(_) => "nongeometric",
        Classification::ContainsFlat(_) => "flat",
    };
    Ok((s.shapes, vol, class))
}

#[pyfunction]
fn bloch_wigner(z: Complex64) -> f64 {
    geometry::bloch_wigner(z)
}

/// `(H_1, H_2(M, ∂M))` as strings such as `"Z + Z/5"`.
#[pyfunction]
fn homology_groups(tri_json: &str) -> PyResult<(String, String)> {
    let h = homology::homology_groups(&parse(tri_json)?).map_err(err)?;
    Ok((h.h1.to_string(), h.h2_relative.to_string()))
}

#[pyfunction]
fn intersection_number(s1: (i64, i64), s2: (i64, i64)) -> i64 {
    homology::intersection_number(s1, s2)
}

#[pyfunction]
fn slope_sum(terms: Vec<(i64, (i64, i64))>) -> (i64, (i64, i64)) {
    homology::slope_sum(&terms)
}

#[pyfunction]
#[pyo3(signature = (tri_json, seed = 0))]
fn certify_geometric(tri_json: &str, seed: u64) -> PyResult<String> {
    Ok(certify::certify_geometric(&parse(tri_json)?, seed).map_err(err)?.to_json())
}

#[pyfunction]
#[pyo3(signature = (tri_json, seed = 0, max_path_length = 24, restarts = 10_000))]
fn certify_nongeometric(tri_json: &str, seed: u64, max_path_length: usize, restarts: usize) -> PyResult<String> {
    let budget = certify::Budget { max_path_length, restarts };
    Ok(certify::certify_nongeometric(&parse(tri_json)?, None, budget, seed).map_err(err)?.to_json())
}

/// `(ok, failures)` for a certificate in JSON.
#[pyfunction]
fn check_certificate(cert_json: &str) -> PyResult<(bool, Vec<String>)> {
    let cert = Certificate::from_json(cert_json).map_err(err)?;
    let r = certify::check_certificate(&cert);
    Ok((r.ok, r.failures))
}

#[pymodule]
fn pyveerkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ptorus_bundle, m)?)?;
    m.add_function(wrap_pyfunction!(signature, m)?)?;
    m.add_function(wrap_pyfunction!(tet_count, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(bloch_wigner, m)?)?;
    m.add_function(wrap_pyfunction!(homology_groups, m)?)?;
    m.add_function(wrap_pyfunction!(intersection_number, m)?)?;
    m.add_function(wrap_pyfunction!(slope_sum, m)?)?;
    m.add_function(wrap_pyfunction!(certify_geometric, m)?)?;
    m.add_function(wrap_pyfunction!(certify_nongeometric, m)?)?;
    m.add_function(wrap_pyfunction!(check_certificate, m)?)?;
    Ok(())
}
