//! dB/linear conversions. Powers are carried in mW throughout the crate, so
//! this is the only place where logarithmic quantities become linear ones.

/// `10^(x/10)`. Works for dB gains and for dBm → mW alike.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dBm to mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}
