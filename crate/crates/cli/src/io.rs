use std::fs;
use std::path::Path;

use adjointkit::operator::OperatorRecord;
use adjointkit::DenseOperator;
use adjointkit::Matrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("malformed JSON in {}: {e}", path.display())))
}

pub fn read_operator(path: &Path) -> Result<DenseOperator, CliError> {
    let record: OperatorRecord = read_json(path)?;
    Ok(record.to_operator::<f64>()?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    read_json(path)
}

/// A plain matrix, given either as nested rows or as an operator record
/// without metrics.
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixInput {
    Rows(Vec<Vec<f64>>),
    Record(OperatorRecord),
}

pub fn read_matrix(path: &Path) -> Result<Matrix, CliError> {
    match read_json::<MatrixInput>(path)? {
        MatrixInput::Rows(rows) => Ok(Matrix::from_rows(&rows)?),
        MatrixInput::Record(r) => {
            if r.domain_metric.is_some() || r.codomain_metric.is_some() {
                return Err(CliError::Validation(format!(
                    "{}: metrics are meaningless for a plain matrix",
                    path.display()
                )));
            }
            Ok(Matrix::from_row_major(r.rows, r.cols, r.entries)?)
        }
    }
}

pub fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}
