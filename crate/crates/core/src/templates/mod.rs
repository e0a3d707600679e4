//! REG and PIX models over frozen word embeddings.

mod checkpoint;
mod head;
mod interpret;
mod train;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{BBox, Instance, Role, Triplet};
use crate::embed::EmbeddingTables;
use crate::error::{Error, Result};
use crate::net::DenseParams;

pub use checkpoint::{load_bundle, read_bundle, save_bundle, write_bundle, FoldModel, ModelBundle, BUNDLE_FORMAT};
pub use head::{Head, HeadKind, HeadRegistry, PixHead, RegHead};
pub use interpret::{fit_linear_interpreter, rank_weights, LinearInterpreter, RankOrder};
pub use train::{train, TrainConfig};

/// Tolerance under which heatmap cells count as tied for the maximum.
pub const MAX_TIE_TOLERANCE: f64 = 1e-9;

/// Text triplet plus the subject's box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub subject_word: String,
    pub relation_word: String,
    pub object_word: String,
    pub subject_box: BBox,
}

impl Query {
    pub fn new(triplet: &Triplet, subject_box: BBox) -> Self {
        Self {
            subject_word: triplet.subject.clone(),
            relation_word: triplet.relation.clone(),
            object_word: triplet.object.clone(),
            subject_box,
        }
    }

    pub fn triplet(&self) -> Triplet {
        Triplet::new(&self.subject_word, &self.relation_word, &self.object_word)
    }
}

impl From<&Instance> for Query {
    fn from(inst: &Instance) -> Self {
        Self {
            subject_word: inst.subject_word.clone(),
            relation_word: inst.relation_word.clone(),
            object_word: inst.object_word.clone(),
            subject_box: inst.subject_box,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegPrediction {
    pub object_center: [f64; 2],
    pub object_half: [f64; 2],
}

impl RegPrediction {
    pub fn from_output(row: &[f64]) -> Self {
        Self {
            object_center: [row[0], row[1]],
            object_half: [row[2], row[3]],
        }
    }

    pub fn to_box(&self) -> BBox {
        BBox::new(
            self.object_center[0],
            self.object_center[1],
            self.object_half[0],
            self.object_half[1],
        )
    }
}

/// `M x M` activations in `[0, 1]`, row `i` growing downward.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    cells: Array2<f64>,
}

impl HeatmapGrid {
    pub fn new(cells: Array2<f64>) -> Result<Self> {
        let (rows, cols) = cells.dim();
        if rows != cols || rows < 2 {
            return Err(Error::Shape(format!("heatmap must be square with side >= 2, got {rows}x{cols}")));
        }
        if let Some(v) = cells.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Shape(format!("heatmap activation {v} outside [0, 1]")));
        }
        Ok(Self { cells })
    }

    /// Builds a grid from a flat row-major slice of length `M^2`.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        let side = (values.len() as f64).sqrt().round() as usize;
        if side * side != values.len() {
            return Err(Error::Shape(format!("{} values do not form a square grid", values.len())));
        }
        Self::new(Array2::from_shape_vec((side, side), values.to_vec()).expect("checked length"))
    }

    pub fn side(&self) -> usize {
        self.cells.nrows()
    }

    pub fn cells(&self) -> &Array2<f64> {
        &self.cells
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.cells.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub query: Query,
    pub head: HeadKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Vec<f64>>>,
}

impl PredictionRecord {
    pub fn reg(query: Query, prediction: &RegPrediction) -> Self {
        Self {
            query,
            head: HeadKind::Reg,
            center: Some(prediction.object_center),
            half: Some(prediction.object_half),
            grid: None,
        }
    }

    pub fn pix(query: Query, grid: &HeatmapGrid) -> Self {
        Self {
            query,
            head: HeadKind::Pix,
            center: None,
            half: None,
            grid: Some(grid.rows()),
        }
    }

    pub fn reg_prediction(&self) -> Result<RegPrediction> {
        match (self.head, self.center, self.half) {
            (HeadKind::Reg, Some(c), Some(h)) => Ok(RegPrediction {
                object_center: c,
                object_half: h,
            }),
            _ => Err(Error::Scene("record is not a REG prediction".into())),
        }
    }

    pub fn heatmap(&self) -> Result<HeatmapGrid> {
        match (self.head, &self.grid) {
            (HeadKind::Pix, Some(rows)) => {
                let flat: Vec<f64> = rows.concat();
                if rows.iter().any(|r| r.len() != rows.len()) {
                    return Err(Error::Shape("heatmap rows are ragged".into()));
                }
                HeatmapGrid::from_flat(&flat)
            }
            _ => Err(Error::Scene("record is not a PIX prediction".into())),
        }
    }
}

/// Center of cell `(i, j)` in normalized coordinates, as `(x, y)`.
pub fn cell_center(i: usize, j: usize, side: usize) -> [f64; 2] {
    let m = side as f64;
    [(j as f64 + 0.5) / m, (i as f64 + 0.5) / m]
}

pub(crate) fn rasterize_into(object: &BBox, side: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), side * side);
    out.fill(0.0);
    if object.half_w <= 0.0 || object.half_h <= 0.0 {
        let cell = |v: f64| ((v * side as f64).floor().max(0.0) as usize).min(side - 1);
        out[cell(object.center_y) * side + cell(object.center_x)] = 1.0;
        return;
    }
    let (x0, x1) = (object.left().max(0.0), object.right().min(1.0));
    let (y0, y1) = (object.top().max(0.0), object.bottom().min(1.0));
    for i in 0..side {
        for j in 0..side {
            let [cx, cy] = cell_center(i, j, side);
            if x0 <= cx && cx <= x1 && y0 <= cy && cy <= y1 {
                out[i * side + j] = 1.0;
            }
        }
    }
}

/// Binary membership grid: a cell is set when its center lies inside the
/// box clipped to the unit square (boundaries included). A box with a zero
/// half-extent sets only the cell containing its center.
pub fn rasterize_box(object: &BBox, side: usize) -> Result<Array2<f64>> {
    if side < 2 {
        return Err(Error::Config(format!("grid side must be >= 2, got {side}")));
    }
    let mut out = Array2::zeros((side, side));
    rasterize_into(object, side, out.as_slice_mut().expect("standard layout"));
    Ok(out)
}

/// Mean center of the cells tied for the maximum activation.
pub fn heatmap_center(grid: &HeatmapGrid) -> [f64; 2] {
    let side = grid.side();
    let max = grid.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = [0.0, 0.0];
    let mut count = 0usize;
    for ((i, j), &v) in grid.cells.indexed_iter() {
        if max - v <= MAX_TIE_TOLERANCE {
            let c = cell_center(i, j, side);
            sum[0] += c[0];
            sum[1] += c[1];
            count += 1;
        }
    }
    [sum[0] / count as f64, sum[1] / count as f64]
}

/// `[emb_S, emb_R, emb_O, S_cx, S_cy, S_hw, S_hh]`.
pub fn assemble_input(query: &Query, tables: &EmbeddingTables) -> Result<Vec<f64>> {
    let mut row = vec![0.0; tables.width() + 4];
    write_input(query, tables, false, &mut row)?;
    Ok(row)
}

fn write_input(query: &Query, tables: &EmbeddingTables, drop_size: bool, out: &mut [f64]) -> Result<()> {
    let mut offset = 0;
    for (role, token) in [
        (Role::Subject, &query.subject_word),
        (Role::Relation, &query.relation_word),
        (Role::Object, &query.object_word),
    ] {
        let table = tables.get(role);
        let index = table.vocabulary().require(token)?;
        table.write_row(index, &mut out[offset..offset + table.dim()]);
        offset += table.dim();
    }
    let b = &query.subject_box;
    out[offset] = b.center_x;
    out[offset + 1] = b.center_y;
    let (hw, hh) = if drop_size { (0.0, 0.0) } else { (b.half_w, b.half_h) };
    out[offset + 2] = hw;
    out[offset + 3] = hh;
    Ok(())
}

pub(crate) fn assemble_batch<'a, I>(queries: I, tables: &EmbeddingTables, drop_size: bool) -> Result<Array2<f64>>
where
    I: ExactSizeIterator<Item = &'a Query>,
{
    let width = tables.width() + 4;
    let mut x = Array2::zeros((queries.len(), width));
    for (mut row, q) in x.rows_mut().into_iter().zip(queries) {
        write_input(q, tables, drop_size, row.as_slice_mut().expect("standard layout"))?;
    }
    Ok(x)
}

/// Where a model's training data came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub stoplist_hash: String,
    pub mirrored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub head: HeadKind,
    pub params: DenseParams,
    pub tables: EmbeddingTables,
    pub config: TrainConfig,
    pub provenance: Provenance,
    pub loss_history: Vec<f64>,
}

impl TrainedModel {
    /// Checks the structural invariants tying parameters to head and tables.
    pub fn validate(&self) -> Result<()> {
        let head = HeadRegistry::default().for_kind(self.head)?;
        let input = self.tables.width() + 4;
        if self.params.input_width() != input {
            return Err(Error::Shape(format!(
                "first layer takes {} inputs, embeddings and subject box give {input}",
                self.params.input_width()
            )));
        }
        let output = head.output_width(self.config.grid_size);
        if self.params.output_width() != output {
            return Err(Error::Shape(format!(
                "{} head needs {output} outputs, network has {}",
                self.head,
                self.params.output_width()
            )));
        }
        if self.params.output_activation() != head.output_activation() {
            return Err(Error::Shape(format!("{} head has the wrong output activation", self.head)));
        }
        if !self.params.all_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    /// Method label such as `REG_1H`.
    pub fn label(&self) -> String {
        format!("{}_{}", self.head.tag(), self.tables.variant().tag())
    }

    /// Output-layer activations, one row per query.
    pub fn predict_raw(&self, queries: &[Query]) -> Result<Array2<f64>> {
        let x = assemble_batch(queries.iter(), &self.tables, self.config.drop_subject_size)?;
        self.params.predict(x.view())
    }

    fn require(&self, head: HeadKind) -> Result<()> {
        if self.head != head {
            return Err(Error::HeadMismatch {
                expected: head.tag(),
                actual: self.head.tag(),
            });
        }
        Ok(())
    }

    pub fn predict_reg_batch(&self, queries: &[Query]) -> Result<Vec<RegPrediction>> {
        self.require(HeadKind::Reg)?;
        let out = self.predict_raw(queries)?;
        Ok(out
            .rows()
            .into_iter()
            .map(|r| RegPrediction::from_output(r.as_slice().expect("standard layout")))
            .collect())
    }

    pub fn predict_pix_batch(&self, queries: &[Query]) -> Result<Vec<HeatmapGrid>> {
        self.require(HeadKind::Pix)?;
        let out = self.predict_raw(queries)?;
        out.rows()
            .into_iter()
            .map(|r| HeatmapGrid::from_flat(r.as_slice().expect("standard layout")))
            .collect()
    }
}

pub fn predict_reg(model: &TrainedModel, query: &Query) -> Result<RegPrediction> {
    Ok(model.predict_reg_batch(std::slice::from_ref(query))?.remove(0))
}

pub fn predict_pix(model: &TrainedModel, query: &Query) -> Result<HeatmapGrid> {
    Ok(model.predict_pix_batch(std::slice::from_ref(query))?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::embed::make_one_hot;
    use proptest::prelude::*;

    fn tables2() -> EmbeddingTables {
        let v = |role, a: &str, b: &str| Vocabulary::from_tokens(role, [a, b]).unwrap();
        EmbeddingTables {
            subject: make_one_hot(&v(Role::Subject, "man", "woman")).unwrap(),
            relation: make_one_hot(&v(Role::Relation, "holding", "riding")).unwrap(),
            object: make_one_hot(&v(Role::Object, "hat", "horse")).unwrap(),
        }
    }

    fn query(s: &str, r: &str, o: &str) -> Query {
        Query::new(&Triplet::new(s, r, o), BBox::new(0.3, 0.4, 0.1, 0.2))
    }

    #[test]
    fn one_hot_input_layout() {
        let x = assemble_input(&query("woman", "holding", "horse"), &tables2()).unwrap();
        assert_eq!(x.len(), 10);
        assert_eq!(x, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.3, 0.4, 0.1, 0.2]);
        assert!(matches!(
            assemble_input(&query("woman", "holding", "cat"), &tables2()),
            Err(Error::UnknownToken { .. })
        ));
    }

    #[test]
    fn dropping_subject_size_zeroes_last_slots() {
        let t = tables2();
        let q = query("man", "riding", "hat");
        let x = assemble_batch([q].iter(), &t, true).unwrap();
        assert_eq!(x.row(0).to_vec()[6..], [0.3, 0.4, 0.0, 0.0]);
    }

    #[test]
    fn rasterize_full_and_tiny() {
        let full = rasterize_box(&BBox::new(0.5, 0.5, 0.5, 0.5), 15).unwrap();
        assert!(full.iter().all(|&v| v == 1.0));
        let tiny = rasterize_box(&BBox::new(0.5, 0.5, 0.02, 0.02), 15).unwrap();
        assert_eq!(tiny.sum(), 1.0);
        assert_eq!(tiny[[7, 7]], 1.0);
        let point = rasterize_box(&BBox::new(0.1, 0.95, 0.0, 0.0), 15).unwrap();
        assert_eq!(point.sum(), 1.0);
        assert_eq!(point[[14, 1]], 1.0);
        assert!(rasterize_box(&BBox::new(0.5, 0.5, 0.1, 0.1), 1).is_err());
    }

    #[test]
    fn rasterize_matches_enumeration() {
        // Count cell centers inside the box directly.
        let b = BBox::new(0.37, 0.61, 0.21, 0.08);
        let grid = rasterize_box(&b, 15).unwrap();
        let mut expected = 0;
        for i in 0..15 {
            for j in 0..15 {
                let (x, y) = ((j as f64 + 0.5) / 15.0, (i as f64 + 0.5) / 15.0);
                if (x - 0.37).abs() <= 0.21 && (y - 0.61).abs() <= 0.08 {
                    expected += 1;
                    assert_eq!(grid[[i, j]], 1.0);
                }
            }
        }
        assert_eq!(grid.sum() as usize, expected);
    }

    #[test]
    fn center_examples() {
        let mut cells = Array2::zeros((15, 15));
        cells[[7, 7]] = 0.9;
        assert_eq!(heatmap_center(&HeatmapGrid::new(cells).unwrap()), [0.5, 0.5]);

        let mut cells = Array2::zeros((15, 15));
        cells[[0, 0]] = 0.8;
        cells[[0, 14]] = 0.8;
        let c = heatmap_center(&HeatmapGrid::new(cells).unwrap());
        assert!((c[0] - 0.5).abs() < 1e-12);
        assert!((c[1] - 1.0 / 30.0).abs() < 1e-12);

        let c = heatmap_center(&HeatmapGrid::new(Array2::from_elem((15, 15), 0.5)).unwrap());
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn heatmap_validation() {
        assert!(HeatmapGrid::new(Array2::from_elem((1, 1), 0.5)).is_err());
        assert!(HeatmapGrid::new(Array2::from_elem((3, 3), 1.5)).is_err());
        assert!(HeatmapGrid::from_flat(&[0.1; 8]).is_err());
    }

    proptest! {
        #[test]
        fn rasterize_monotone(
            cx in 0.0f64..1.0, cy in 0.0f64..1.0,
            hw in 0.001f64..0.5, hh in 0.001f64..0.5,
            gw in 0.0f64..0.3, gh in 0.0f64..0.3,
            side in 2usize..30,
        ) {
            let small = rasterize_box(&BBox::new(cx, cy, hw, hh), side).unwrap();
            let big = rasterize_box(&BBox::new(cx, cy, hw + gw, hh + gh), side).unwrap();
            prop_assert!(small.iter().zip(big.iter()).all(|(s, b)| *s <= *b));
        }

        #[test]
        fn center_in_cell_hull(values in proptest::collection::vec(0.0f64..=1.0, 4..=400)) {
            let side = (values.len() as f64).sqrt() as usize;
            let grid = HeatmapGrid::from_flat(&values[..side * side]).unwrap();
            let c = heatmap_center(&grid);
            let lo = 0.5 / side as f64;
            for v in c {
                prop_assert!(v >= lo - 1e-12 && v <= 1.0 - lo + 1e-12);
            }
        }
    }
}
