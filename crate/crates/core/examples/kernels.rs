//! Prints stable spline kernels of both orders and their smallest eigenvalue.

use robust_sysid::kernel::{build_kernel, KernelOrder, KernelSpec};

fn main() -> robust_sysid::Result<()> {
    let n = 6;
    for order in [KernelOrder::First, KernelOrder::Second] {
        let k = build_kernel(KernelSpec::new(order, 0.8, n)?)?;
        println!("{order:?} kernel, beta = 0.8, n = {n}");
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:8.4}", k.matrix()[(i, j)])).collect();
            println!("  {}", row.join(" "));
        }
        let min_eig = k.matrix().clone().symmetric_eigenvalues().min();
        println!("  trace {:.4}, min eigenvalue {min_eig:.3e}\n", k.trace());
    }
    Ok(())
}
