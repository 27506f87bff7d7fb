//! Serialized formats: matrices, DAGs and models as JSON, DAGs as DOT,
//! samples as CSV. Node labels are 1-based in every external format and
//! carry an optional name table.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::model::RmlmModel;
use crate::order::OrderResult;
use crate::projection::MaxProjection;
use crate::tropical::MaxLinearMatrix;

/// `{"d": int, "names": [string], "A": [[real]]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub d: usize,
    pub names: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(a: &MaxLinearMatrix, names: &[String]) -> Result<Self> {
        if names.len() != a.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for a {}-node matrix",
                names.len(),
                a.dim()
            )));
        }
        Ok(MatrixJson {
            d: a.dim(),
            names: names.to_vec(),
            a: a.dense().to_nested(),
        })
    }

    /// Validates the payload; rows with unit Euclidean norm are flagged
    /// as standardised.
    pub fn into_matrix(self) -> Result<(MaxLinearMatrix, Vec<String>)> {
        if self.names.len() != self.d || self.a.len() != self.d {
            return Err(Error::InvalidMatrix(format!(
                "inconsistent dimensions: d={}, {} names, {} rows",
                self.d,
                self.names.len(),
                self.a.len()
            )));
        }
        let matrix = MaxLinearMatrix::from_rows(self.a)?;
        let unit_rows = (0..matrix.dim()).all(|i| {
            let norm: f64 = matrix.row(i).iter().map(|v| v * v).sum();
            (norm - 1.0).abs() <= 1e-9
        });
        let matrix = if unit_rows {
            matrix.assume_standardised()?
        } else {
            matrix
        };
        Ok((matrix, self.names))
    }
}

/// `{"d": int, "edges": [[j, i]], "names": [string]}` with 1-based
/// labels; an edge `[j, i]` points from `j` to `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagJson {
    pub d: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl DagJson {
    pub fn from_dag(dag: &Dag, names: Option<&[String]>) -> Self {
        DagJson {
            d: dag.node_count(),
            edges: dag.edges().map(|(j, i)| [j + 1, i + 1]).collect(),
            names: names.map(<[String]>::to_vec),
        }
    }

    pub fn into_dag(self) -> Result<(Dag, Option<Vec<String>>)> {
        if let Some(names) = &self.names {
            if names.len() != self.d {
                return Err(Error::InvalidMatrix(format!(
                    "{} names for a {}-node graph",
                    names.len(),
                    self.d
                )));
            }
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for [j, i] in self.edges {
            if j == 0 || i == 0 {
                return Err(Error::InvalidMatrix(
                    "node labels are 1-based; found 0".into(),
                ));
            }
            edges.push((j - 1, i - 1));
        }
        Ok((Dag::new(self.d, edges)?, self.names))
    }
}

/// Matrix format plus `{"alpha": 2, "seed": int}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub d: usize,
    pub names: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub alpha: f64,
    pub seed: u64,
}

impl ModelJson {
    pub fn from_model(model: &RmlmModel, names: &[String]) -> Result<Self> {
        let m = MatrixJson::from_matrix(model.matrix(), names)?;
        Ok(ModelJson {
            d: m.d,
            names: m.names,
            a: m.a,
            alpha: crate::model::ALPHA,
            seed: model.seed(),
        })
    }

    pub fn into_model(self) -> Result<(RmlmModel, Vec<String>)> {
        if self.alpha != crate::model::ALPHA {
            return Err(Error::InvalidModel(format!(
                "tail index must be {}, got {}",
                crate::model::ALPHA,
                self.alpha
            )));
        }
        let seed = self.seed;
        let (matrix, names) = MatrixJson {
            d: self.d,
            names: self.names,
            a: self.a,
        }
        .into_matrix()?;
        Ok((RmlmModel::new(matrix, seed)?, names))
    }
}

/// Max-projection descriptor with 1-based labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProjectionJson {
    Node { i: usize },
    Set { set: Vec<usize> },
    Scaled { i: usize, j: usize, set: Vec<usize>, a: f64 },
}

impl ProjectionJson {
    pub fn from_projection(p: &MaxProjection) -> Self {
        match p {
            MaxProjection::Node(i) => ProjectionJson::Node { i: i + 1 },
            MaxProjection::Set(set) => ProjectionJson::Set {
                set: set.iter().map(|&n| n + 1).collect(),
            },
            MaxProjection::Scaled { i, j, set, a } => ProjectionJson::Scaled {
                i: i + 1,
                j: j + 1,
                set: set.iter().map(|&n| n + 1).collect(),
                a: *a,
            },
        }
    }

    pub fn into_projection(self) -> Result<MaxProjection> {
        let shift = |v: usize| {
            if v == 0 {
                Err(Error::InvalidDescriptor(
                    "node labels are 1-based; found 0".into(),
                ))
            } else {
                Ok(v - 1)
            }
        };
        match self {
            ProjectionJson::Node { i } => Ok(MaxProjection::node(shift(i)?)),
            ProjectionJson::Set { set } => {
                let nodes: Result<Vec<usize>> = set.into_iter().map(shift).collect();
                MaxProjection::set(nodes?)
            }
            ProjectionJson::Scaled { i, j, set, a } => {
                let nodes: Result<Vec<usize>> = set.into_iter().map(shift).collect();
                MaxProjection::scaled(shift(i)?, shift(j)?, nodes?, a)
            }
        }
    }
}

/// One estimated scaling: which projection, at which exceedance count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub descriptor: ProjectionJson,
    pub k: usize,
    pub estimate: f64,
}

/// Order report: iteration groups and the final order, by node name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderReportJson {
    pub steps: Vec<Vec<String>>,
    pub order: Vec<String>,
    pub a: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl OrderReportJson {
    pub fn from_result(result: &OrderResult, names: &[String]) -> Result<Self> {
        if names.len() != result.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for a {}-node order",
                names.len(),
                result.dim()
            )));
        }
        Ok(OrderReportJson {
            steps: result
                .steps
                .iter()
                .map(|g| g.iter().map(|&n| names[n].clone()).collect())
                .collect(),
            order: result.order.iter().map(|&n| names[n].clone()).collect(),
            a: result.params.a,
            epsilon: result.params.epsilon,
            k: result.params.k,
        })
    }

    pub fn into_result(self, names: &[String]) -> Result<OrderResult> {
        let lookup = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidData(format!("unknown node name {name:?}")))
        };
        let order: Result<Vec<usize>> = self.order.iter().map(|n| lookup(n)).collect();
        let steps: Result<Vec<Vec<usize>>> = self
            .steps
            .iter()
            .map(|g| g.iter().map(|n| lookup(n)).collect())
            .collect();
        Ok(OrderResult {
            order: order?,
            steps: steps?,
            params: crate::order::OrderParams {
                a: self.a,
                epsilon: self.epsilon,
                k: self.k,
            },
        })
    }
}

/// DOT rendering: every node declared, one edge line per pair, labels
/// from the name table.
pub fn dot_export(dag: &Dag, names: &[String]) -> Result<String> {
    if names.len() != dag.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for a {}-node graph",
            names.len(),
            dag.node_count()
        )));
    }
    let mut out = String::from("digraph {\n");
    for name in names {
        out.push_str(&format!("  \"{}\";\n", escape_dot(name)));
    }
    for (j, i) in dag.edges() {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\";\n",
            escape_dot(&names[j]),
            escape_dot(&names[i])
        ));
    }
    out.push_str("}\n");
    Ok(out)
}

fn escape_dot(name: &str) -> String {
    name.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Default node names `X1..Xd`.
pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("X{i}")).collect()
}

/// Parse a CSV sample: header row of column names, numeric body. When
/// `date_column` is set the first column is dropped as a label column.
/// Requires at least two data columns.
pub fn read_csv<R: Read>(reader: R, date_column: bool) -> Result<(DenseMatrix, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let skip = usize::from(date_column);
    let names: Vec<String> = rdr
        .headers()?
        .iter()
        .skip(skip)
        .map(str::to_owned)
        .collect();
    if names.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 data columns, got {}",
            names.len()
        )));
    }
    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != names.len() + skip {
            return Err(Error::InvalidData(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                record.len(),
                names.len() + skip
            )));
        }
        for field in record.iter().skip(skip) {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidData(format!(
                    "row {}: cannot parse {field:?} as a number",
                    line + 2
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "row {}: non-finite value {v}",
                    line + 2
                )));
            }
            values.push(v);
        }
        n += 1;
    }
    Ok((DenseMatrix::from_values(n, names.len(), values)?, names))
}

pub fn read_csv_path(path: &Path, date_column: bool) -> Result<(DenseMatrix, Vec<String>)> {
    read_csv(std::fs::File::open(path)?, date_column)
}

/// Write a sample as CSV with the names as header.
pub fn write_csv<W: Write>(writer: W, data: &DenseMatrix, names: &[String]) -> Result<()> {
    if names.len() != data.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} columns",
            names.len(),
            data.ncols()
        )));
    }
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(names)?;
    let mut fields: Vec<String> = Vec::with_capacity(names.len());
    for r in 0..data.nrows() {
        fields.clear();
        fields.extend(data.row(r).iter().map(|v| format!("{v}")));
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_keeps_standardised_flag() {
        let a = crate::tropical::standardize(
            &MaxLinearMatrix::from_rows(vec![vec![0.8, 0.26], vec![0.0, 0.43]]).unwrap(),
        )
        .unwrap();
        let names = default_names(2);
        let json = MatrixJson::from_matrix(&a, &names).unwrap();
        let text = serde_json::to_string(&json).unwrap();
        let parsed: MatrixJson = serde_json::from_str(&text).unwrap();
        let (back, back_names) = parsed.into_matrix().unwrap();
        assert_eq!(back_names, names);
        assert!(back.is_standardised());
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(back.get(i, j), a.get(i, j), "full f64 round trip");
            }
        }
    }

    #[test]
    fn dag_json_uses_one_based_labels() {
        let dag = Dag::new(3, [(2, 0), (1, 0)]).unwrap();
        let json = DagJson::from_dag(&dag, Some(&default_names(3)));
        assert_eq!(json.edges, vec![[2, 1], [3, 1]]);
        let (back, names) = json.into_dag().unwrap();
        assert_eq!(back, dag);
        assert_eq!(names.unwrap(), default_names(3));
    }

    #[test]
    fn dag_json_rejects_zero_label_and_cycles() {
        let bad = DagJson {
            d: 2,
            edges: vec![[0, 1]],
            names: None,
        };
        assert!(bad.into_dag().is_err());
        let cyclic = DagJson {
            d: 2,
            edges: vec![[1, 2], [2, 1]],
            names: None,
        };
        assert!(cyclic.into_dag().is_err());
    }

    #[test]
    fn model_json_rejects_other_tail_indices() {
        let model = RmlmModel::random(3, 0.5, 1).unwrap();
        let mut json = ModelJson::from_model(&model, &default_names(3)).unwrap();
        json.alpha = 1.5;
        assert!(json.into_model().is_err());
    }

    #[test]
    fn model_json_round_trip_preserves_simulation() {
        let model = RmlmModel::random(4, 0.5, 9).unwrap();
        let json = ModelJson::from_model(&model, &default_names(4)).unwrap();
        let text = serde_json::to_string(&json).unwrap();
        let (back, _) = serde_json::from_str::<ModelJson>(&text)
            .unwrap()
            .into_model()
            .unwrap();
        assert_eq!(back.simulate(20), model.simulate(20));
    }

    #[test]
    fn dot_output_shape() {
        let dag = Dag::new(2, [(1, 0)]).unwrap();
        let names = vec!["Coal".to_string(), "Trans\"x".to_string()];
        let dot = dot_export(&dag, &names).unwrap();
        assert!(dot.starts_with("digraph {"));
        assert!(dot.contains("\"Coal\";"));
        assert!(dot.contains("\"Trans\\\"x\" -> \"Coal\";"));
        assert!(dot.ends_with("}\n"));
    }

    #[test]
    fn csv_round_trip() {
        let data = DenseMatrix::from_rows(vec![vec![1.5, -2.0], vec![0.25, 3.125]]).unwrap();
        let names = vec!["alpha".to_string(), "beta".to_string()];
        let mut buf = Vec::new();
        write_csv(&mut buf, &data, &names).unwrap();
        let (back, back_names) = read_csv(&buf[..], false).unwrap();
        assert_eq!(back, data);
        assert_eq!(back_names, names);
    }

    #[test]
    fn csv_skips_date_column_when_flagged() {
        let text = "date,a,b\n2020-01-01,1.0,2.0\n2020-01-02,3.0,4.0\n";
        let (data, names) = read_csv(text.as_bytes(), true).unwrap();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(data.nrows(), 2);
        assert_eq!(data.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(read_csv("a\n1.0\n".as_bytes(), false).is_err(), "one column");
        assert!(
            read_csv("a,b\n1.0,x\n".as_bytes(), false).is_err(),
            "non-numeric cell"
        );
        assert!(
            read_csv("a,b\n1.0\n".as_bytes(), false).is_err(),
            "short row"
        );
    }

    #[test]
    fn projection_json_round_trip() {
        let p = MaxProjection::scaled(0, 2, [1, 4], 1.3).unwrap();
        let json = ProjectionJson::from_projection(&p);
        let text = serde_json::to_string(&json).unwrap();
        assert!(text.contains("\"type\":\"scaled\""));
        let back: ProjectionJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_projection().unwrap(), p);
    }

    #[test]
    fn order_report_round_trip() {
        let result = OrderResult {
            order: vec![0, 1, 2],
            steps: vec![vec![2], vec![1], vec![0]],
            params: crate::order::OrderParams {
                a: 1.3,
                epsilon: 0.1,
                k: Some(250),
            },
        };
        let names = default_names(3);
        let json = OrderReportJson::from_result(&result, &names).unwrap();
        let back = json.into_result(&names).unwrap();
        assert_eq!(back.order, result.order);
        assert_eq!(back.steps, result.steps);
    }
}
