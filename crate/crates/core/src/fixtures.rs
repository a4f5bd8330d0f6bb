//! Small hand-built datasets shared by tests, benches and the CLI docs.

use crate::ingest::LoanRecord;
use crate::month::Month;

/// Seven loans over two districts and three products, two of them in
/// default. Mirrors the textbook two-layer example: loans `L1..L4` sit in
/// district `A` and `L5..L7` in `B`; products are `red` (L1, L2, L5),
/// `green` (L3, L6) and `yellow` (L4, L7); `L2` and `L6` defaulted.
pub fn fig1_records() -> Vec<LoanRecord> {
    let month = Month::new(2000, 1).expect("valid constant month");
    [
        ("L1", "A", "red", false),
        ("L2", "A", "red", true),
        ("L3", "A", "green", false),
        ("L4", "A", "yellow", false),
        ("L5", "B", "red", false),
        ("L6", "B", "green", true),
        ("L7", "B", "yellow", false),
    ]
    .into_iter()
    .map(|(id, district, product, defaulted)| LoanRecord {
        loan_id: id.to_string(),
        grant_month: month,
        district: district.to_string(),
        product: product.to_string(),
        defaulted,
    })
    .collect()
}
