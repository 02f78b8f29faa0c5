//! Column documentation for every CSV the tool writes.

use std::path::Path;

use serde_json::json;

use crate::artifacts::write_json;
use crate::error::Result;

pub const SCHEMA: &str = "csv_schema.json";

pub fn schema() -> serde_json::Value {
    json!({
        "indicator_{variant}[_d{j}].csv": {
            "header": "lines starting with '#': fingerprint, t_final, directions (x y z; ...)",
            "columns": {
                "tau": "Laplace parameter τ",
                "sign": "sign of the indicator (-1, 0, 1)",
                "log_abs_I": "natural log of |I(τ)|",
                "I_over_exp": "e^{τT}·I(τ); empty when not representable",
                "variant": "I, I_tilde or I_bold"
            }
        },
        "indicator_delta_d{j}.csv": {
            "header": "fingerprint line",
            "columns": {
                "tau": "Laplace parameter τ",
                "sign_I": "sign of I (FDTD background)",
                "log_abs_I": "ln|I|",
                "sign_I_tilde": "sign of Ĩ (closed-form background)",
                "log_abs_I_tilde": "ln|Ĩ|",
                "log_abs_delta": "ln|Ĩ − I|",
                "rel_delta": "|Ĩ − I|/|I|"
            }
        },
        "scaling_{quantity}.csv": {
            "columns": {
                "tau": "Laplace parameter τ",
                "log_value": "natural log of the integral",
                "quantity": "J_full, J_perp, upper_combo or lower_combo"
            }
        }
    })
}

pub fn write(dir: &Path) -> Result<()> {
    write_json(&dir.join(SCHEMA), &schema())
}
