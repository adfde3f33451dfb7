//! Decibel helpers. All reported levels are capped to `±CAP_DB` so that
//! perfect matches and all-zero estimates stay finite and aggregatable.

pub const CAP_DB: f64 = 100.0;

pub fn cap(db: f64) -> f64 {
    db.clamp(-CAP_DB, CAP_DB)
}

/// `10·log10(num/den)` with the cap applied; degenerate numerators and
/// denominators saturate at the corresponding cap instead of producing
/// non-finite values.
pub fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        -CAP_DB
    } else if den <= 0.0 {
        CAP_DB
    } else {
        cap(10.0 * (num / den).log10())
    }
}

pub fn power_db(power: f64) -> f64 {
    if power <= 0.0 {
        -CAP_DB
    } else {
        cap(10.0 * power.log10())
    }
}
