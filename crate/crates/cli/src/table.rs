//! CSV readers and writers for datasets, query points, estimates and bands.
//!
//! Floats use the shortest representation that reads back to the same
//! value, with an exponent outside `[1e-5, 1e16)`. Non-finite values are
//! written as empty fields.

use std::path::Path;

use localband::bootstrap::ConfidenceBand;
use localband::data::{Dataset, QueryVector, Schema};
use localband::estimator::LocalEstimateSet;

use crate::error::CliError;

/// Column roles requested by the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaSpec {
    pub outcome: String,
    pub treatment: Option<String>,
    /// `None` takes every column other than outcome and treatment.
    pub covariates: Option<Vec<String>>,
    /// Names of conditioning covariates; `None` takes all covariates.
    pub conditioning: Option<Vec<String>>,
}

impl SchemaSpec {
    pub fn resolve(&self, headers: &[String]) -> Result<Schema, CliError> {
        let find = |name: &str| -> Result<(), CliError> {
            if headers.iter().any(|h| h == name) {
                Ok(())
            } else {
                Err(localband::Error::Schema(name.to_string()).into())
            }
        };
        find(&self.outcome)?;
        if let Some(t) = &self.treatment {
            find(t)?;
        }
        let covariates: Vec<String> = match &self.covariates {
            Some(c) => {
                for name in c {
                    find(name)?;
                }
                c.clone()
            }
            None => headers
                .iter()
                .filter(|h| **h != self.outcome && Some(*h) != self.treatment.as_ref())
                .cloned()
                .collect(),
        };
        let conditioning = match &self.conditioning {
            Some(names) => names
                .iter()
                .map(|name| {
                    covariates
                        .iter()
                        .position(|c| c == name)
                        .ok_or_else(|| CliError::config(format!("conditioning column `{name}` is not a covariate")).with_key("conditioning"))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => (0..covariates.len()).collect(),
        };
        Ok(Schema::new(self.outcome.clone(), self.treatment.clone(), covariates, conditioning)?)
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::resource(format!("{}: {e}", path.display())))
}

fn parse_cell(field: &str, row: usize, column: &str) -> Result<f64, CliError> {
    field.parse::<f64>().map_err(|_| {
        localband::Error::Parse {
            row,
            column: column.to_string(),
            message: format!("`{field}` is not a number"),
        }
        .into()
    })
}

/// Load the columns named by `spec`; rows are numbered from 0 after the header.
pub fn read_dataset(path: &Path, spec: &SchemaSpec) -> Result<Dataset, CliError> {
    let mut rdr = reader(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let schema = spec.resolve(&headers)?;
    let col = |name: &str| headers.iter().position(|h| h == name).expect("resolved column");
    let y_col = col(&schema.outcome);
    let w_col = schema.treatment.as_deref().map(col);
    let z_cols: Vec<usize> = schema.covariates.iter().map(|c| col(c)).collect();
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut z = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        y.push(parse_cell(&record[y_col], row, &schema.outcome)?);
        if let (Some(c), Some(name)) = (w_col, &schema.treatment) {
            let v = parse_cell(&record[c], row, name)?;
            if v != 0.0 && v != 1.0 {
                return Err(localband::Error::Parse {
                    row,
                    column: name.clone(),
                    message: "treatment must be 0 or 1".into(),
                }
                .into());
            }
            w.push(v as u8);
        }
        for (&c, name) in z_cols.iter().zip(&schema.covariates) {
            z.push(parse_cell(&record[c], row, name)?);
        }
    }
    let w = w_col.map(|_| w);
    Ok(Dataset::new(schema, y, w, z)?)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(data.schema().used_columns())?;
    let w = data.w();
    for i in 0..data.n() {
        let mut rec = vec![fmt(data.y()[i])];
        if let Some(w) = w {
            rec.push(w[i].to_string());
        }
        rec.extend(data.z().row(i).iter().map(|&v| fmt(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Query points: every column is a coordinate, `q` columns expected.
pub fn read_queries(path: &Path, q: usize) -> Result<QueryVector, CliError> {
    let mut rdr = reader(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.len() != q {
        return Err(localband::Error::DimensionMismatch {
            expected: q,
            got: headers.len(),
        }
        .into());
    }
    let mut points = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let point = record
            .iter()
            .zip(&headers)
            .map(|(f, h)| parse_cell(f, row, h))
            .collect::<Result<Vec<_>, _>>()?;
        points.push(point);
    }
    Ok(QueryVector::new(points)?)
}

pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        String::new()
    }
}

fn coordinate_names(schema: &Schema) -> Vec<String> {
    schema.conditioning.iter().map(|&c| schema.covariates[c].clone()).collect()
}

pub fn write_estimates(path: &Path, schema: &Schema, est: &LocalEstimateSet) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = coordinate_names(schema);
    header.extend(["theta_hat", "denominator", "support_size", "status"].map(String::from));
    wtr.write_record(&header)?;
    for (j, x) in est.queries.iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|&v| fmt(v)).collect();
        rec.push(fmt(est.theta_hat[j]));
        rec.push(fmt(est.denominators[j]));
        rec.push(est.support_sizes[j].to_string());
        rec.push(est.statuses[j].as_str().to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_band(path: &Path, schema: &Schema, band: &ConfidenceBand) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = coordinate_names(schema);
    header.extend(["theta_hat", "lower", "upper", "lambda_hat", "status"].map(String::from));
    wtr.write_record(&header)?;
    for (j, x) in band.queries.iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|&v| fmt(v)).collect();
        for v in [band.theta_hat[j], band.lower[j], band.upper[j], band.lambda_hat[j]] {
            rec.push(fmt(v));
        }
        rec.push(band.statuses[j].as_str().to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `(x1, x2, value)` rows for a two-dimensional query set.
pub fn write_heatmap(path: &Path, queries: &QueryVector, values: &[f64]) -> Result<(), CliError> {
    if queries.dim() != 2 {
        return Err(CliError::config(format!("heatmaps need 2 conditioning axes, found {}", queries.dim())));
    }
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["x1", "x2", "value"])?;
    for (x, &v) in queries.iter().zip(values) {
        wtr.write_record([fmt(x[0]), fmt(x[1]), fmt(v)])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SchemaSpec {
        SchemaSpec {
            outcome: "y".into(),
            treatment: Some("w".into()),
            covariates: None,
            conditioning: Some(vec!["b".into()]),
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,w,a,b\n0.1,1,0.25,3\n-2e-7,0,1.5,0.3333333333333333\n7,1,2,4\n").unwrap();
        let data = read_dataset(&path, &spec()).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.schema().covariates, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(data.x().row(1), &[0.3333333333333333]);
        let again_path = dir.path().join("e.csv");
        write_dataset(&again_path, &data).unwrap();
        assert_eq!(read_dataset(&again_path, &spec()).unwrap(), data);
    }

    #[test]
    fn bad_cells_and_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,w,a,b\n0.1,1,0.25,3\n0.2,2,1,1\n").unwrap();
        let err = read_dataset(&path, &spec()).unwrap_err();
        assert!(err.message.contains("row 1"), "{}", err.message);
        std::fs::write(&path, "y,w,a,b\n0.1,1,x,3\n0.2,0,1,1\n").unwrap();
        assert!(read_dataset(&path, &spec()).unwrap_err().message.contains("`x`"));
        let missing = SchemaSpec {
            outcome: "nope".into(),
            ..spec()
        };
        assert_eq!(read_dataset(&path, &missing).unwrap_err().exit_code(), 2);
        assert_eq!(read_dataset(&dir.path().join("absent.csv"), &spec()).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn queries_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        std::fs::write(&path, "x1,x2\n0.1,0.2\n0.3,0.4\n").unwrap();
        let q = read_queries(&path, 2).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q.point(1), &[0.3, 0.4]);
        assert!(read_queries(&path, 3).is_err());
    }
}
