//! Distance-dependent pathloss with log-normal shadowing.

use super::ChannelError;
use crate::units::db_to_linear;

/// Users closer than this to a base station are excluded (35 m).
pub const MIN_DISTANCE_KM: f64 = 0.035;

/// `−128.1 − 37.6·log10(d) + shadow` in dB, `d` in km.
pub fn pathloss_db(distance_km: f64, shadow_db: f64) -> Result<f64, ChannelError> {
    if !(distance_km >= MIN_DISTANCE_KM) || !distance_km.is_finite() {
        return Err(ChannelError::DistanceTooSmall { distance_km });
    }
    Ok(-128.1 - 37.6 * distance_km.log10() + shadow_db)
}

pub fn pathloss_linear(distance_km: f64, shadow_db: f64) -> Result<f64, ChannelError> {
    pathloss_db(distance_km, shadow_db).map(db_to_linear)
}
