//! Coefficients of ergodicity and Hajnal's inequality on small matrices.

use iabc::matrix::{ergodicity, hajnal_bound_check, Matrix};

fn show(name: &str, m: &Matrix) -> iabc::Result<()> {
    let r = ergodicity(m)?;
    println!(
        "{name:<10} delta {:.4}  lambda {:.4}  scrambling {}",
        r.delta, r.lambda, r.scrambling
    );
    Ok(())
}

fn main() -> iabc::Result<()> {
    let identity = Matrix::identity(3);
    let averaging =
        Matrix::from_rows(&[vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3]])?;
    let lazy = Matrix::from_rows(&[
        vec![0.5, 0.5, 0.0],
        vec![0.0, 0.5, 0.5],
        vec![0.5, 0.0, 0.5],
    ])?;
    // Rows 1 and 3 share nothing, so one step does not scramble.
    let split = Matrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.5, 0.5, 0.0],
        vec![0.0, 0.0, 1.0],
    ])?;

    show("identity", &identity)?;
    show("averaging", &averaging)?;
    show("lazy", &lazy)?;
    show("split", &split)?;
    show("lazy^2", &lazy.mul(&lazy)?)?;

    let h = hajnal_bound_check(&[lazy.clone(), split, lazy])?;
    println!(
        "delta(product) = {:.4} <= prod lambda = {:.4}: {}",
        h.product_delta, h.lambda_product, h.holds
    );
    Ok(())
}
