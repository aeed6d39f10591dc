//! Battery life from capacity and average current draw.

use std::fmt::Write;

/// Converter power at the analog supply, watts.
pub const ADC_POWER_W: f64 = 0.042;
pub const ADC_SUPPLY_V: f64 = 5.0;

/// Default draw per component, milliamps. Only the converter figure comes
/// from its power rating; the others are an illustrative split of the rest
/// so that the total is 133.33 mA.
pub const COMPONENTS: [(&str, f64); 4] = [
    ("adc", ADC_POWER_W / ADC_SUPPLY_V * 1e3),
    ("mcu", 40.0),
    ("radio", 80.0),
    ("sensors", 4.93),
];

pub fn default_draw_ma() -> f64 {
    COMPONENTS.iter().map(|(_, ma)| ma).sum()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BudgetError {
    #[error("capacity must be positive and finite (got {0} mAh)")]
    Capacity(f64),
    #[error("current draw must be positive and finite (got {0} mA)")]
    Draw(f64),
}

/// Hours of operation: `capacity / draw`.
pub fn hours(capacity_mah: f64, draw_ma: f64) -> Result<f64, BudgetError> {
    if !(capacity_mah > 0.0 && capacity_mah.is_finite()) {
        return Err(BudgetError::Capacity(capacity_mah));
    }
    if !(draw_ma > 0.0 && draw_ma.is_finite()) {
        return Err(BudgetError::Draw(draw_ma));
    }
    Ok(capacity_mah / draw_ma)
}

/// Component table and the resulting runtime. `draw_ma` replaces the
/// component total when given.
pub fn report(capacity_mah: f64, draw_ma: Option<f64>) -> Result<(f64, String), BudgetError> {
    let total = draw_ma.unwrap_or_else(default_draw_ma);
    let h = hours(capacity_mah, total)?;
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>8}", "component", "mA");
    for (name, ma) in COMPONENTS {
        let _ = writeln!(out, "{name:<10} {ma:>8.2}");
    }
    let label = if draw_ma.is_some() { "total*" } else { "total" };
    let _ = writeln!(out, "{label:<10} {total:>8.2}");
    if draw_ma.is_some() {
        let _ = writeln!(
            out,
            "* measured draw given on the command line replaces the component sum"
        );
    }
    let _ = writeln!(out, "{capacity_mah} mAh / {total} mA = {h:.2} h");
    Ok((h, out))
}
