#![no_main]

use libfuzzer_sys::fuzz_target;
use msfem::sparse::CsrMatrix;
use msfem::Complex64;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = CsrMatrix::<f64>::from_matrix_market(text) {
        let back = CsrMatrix::<f64>::from_matrix_market(&m.to_matrix_market()).expect("round trip");
        assert_eq!(back.nnz(), m.nnz());
    }
    let _ = CsrMatrix::<Complex64>::from_matrix_market(text);
});
