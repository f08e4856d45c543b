//! Similarity measures `S(x, y) = C(G(x), G(y))`: two modeled weighted sums and
//! four measures with learned parts.

mod chopra;
mod classifier;
mod esnn;
mod gabel;
mod weighted;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use chopra::contrastive_loss;
pub use classifier::classification_loss;
pub use esnn::{esnn_loss, esnn_pair_loss, EsnnGradient};
pub use gabel::gabel_loss;
pub use weighted::{LocalSim, LocalSimParams};

use crate::data::{pairs_over, Attribute, Dataset, PairMode, PairTriplet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{init_network, Activation, Network, NetworkDocument};
use crate::optim::OptimizerConfig;
use crate::scalar::Scalar;
use crate::seed::derive_seed;

/// Pairs evaluated per batched network call.
pub(crate) const PAIR_CHUNK: usize = 4096;

pub const MEASURE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureTag {
    T11,
    T21,
    Gabel,
    Chopra,
    T31,
    Esnn,
}

impl MeasureTag {
    /// Column order used in reports.
    pub const ALL: [MeasureTag; 6] = [
        MeasureTag::Esnn,
        MeasureTag::Chopra,
        MeasureTag::Gabel,
        MeasureTag::T31,
        MeasureTag::T11,
        MeasureTag::T21,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureTag::T11 => "t11",
            MeasureTag::T21 => "t21",
            MeasureTag::Gabel => "gabel",
            MeasureTag::Chopra => "chopra",
            MeasureTag::T31 => "t31",
            MeasureTag::Esnn => "esnn",
        }
    }

    /// Which parts of the measure are modeled and which are learned.
    pub fn type_name(self) -> &'static str {
        match self {
            MeasureTag::T11 => "type1",
            MeasureTag::T21 => "type2-local",
            MeasureTag::Gabel => "type2-gabel",
            MeasureTag::Chopra => "type3-chopra",
            MeasureTag::T31 => "type3-classifier",
            MeasureTag::Esnn => "type4-esnn",
        }
    }

    /// Whether training runs an optimizer.
    pub fn is_learned(self) -> bool {
        !matches!(self, MeasureTag::T11 | MeasureTag::T21)
    }

    /// Whether `S(x, y) == S(y, x)` holds by construction.
    pub fn is_symmetric(self) -> bool {
        self != MeasureTag::Gabel
    }

    /// Pair set used when the config does not name one. Symmetric losses see
    /// each unordered pair once; the concatenating network needs both orders.
    pub fn default_pair_mode(self) -> PairMode {
        match self {
            MeasureTag::Gabel => PairMode::OrderedFull,
            _ => PairMode::UnorderedUnique,
        }
    }

    /// Parses a comma-separated list; `all` expands to [`MeasureTag::ALL`].
    pub fn parse_list(s: &str) -> Result<Vec<MeasureTag>> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for MeasureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown measure `{s}`")))
    }
}

/// Training hyperparameters shared by all measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    /// Weight of the similarity term in the eSNN loss.
    pub alpha: f64,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    /// `None` picks [`MeasureTag::default_pair_mode`].
    pub pair_mode: Option<PairMode>,
    /// Hidden widths of `G` (and of the pair network for gabel).
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    /// Hidden widths of the eSNN combiner.
    pub combiner_hidden: Vec<usize>,
    /// Hidden activation of the eSNN combiner. Its input `|G(x) - G(y)|` is
    /// non-negative, so relu units tend to switch off together near zero and
    /// leave the score flat there.
    pub combiner_activation: Activation,
    pub contrastive_margin: f64,
    /// Record validation retrieval loss every this many epochs.
    pub validate_every: Option<usize>,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            epochs: 200,
            optimizer: OptimizerConfig::default(),
            pair_mode: None,
            hidden: vec![13, 13],
            hidden_activation: Activation::Relu,
            combiner_hidden: vec![13, 13],
            combiner_activation: Activation::Sigmoid,
            contrastive_margin: 1.0,
            validate_every: None,
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        esnn::check_alpha(self.alpha)?;
        self.optimizer.validate()?;
        if self.hidden.contains(&0) || self.combiner_hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if self.hidden_activation == Activation::Softmax
            || self.combiner_activation == Activation::Softmax
        {
            return Err(Error::Config("softmax is only allowed on output layers".into()));
        }
        if self.hidden.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if !(self.contrastive_margin > 0.0 && self.contrastive_margin.is_finite()) {
            return Err(Error::Config("contrastive margin must be positive".into()));
        }
        if self.validate_every == Some(0) {
            return Err(Error::Config("validate_every must be positive".into()));
        }
        Ok(())
    }

    pub fn pair_mode_for(&self, tag: MeasureTag) -> PairMode {
        self.pair_mode.unwrap_or_else(|| tag.default_pair_mode())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub epoch: usize,
    pub loss: f64,
}

/// Per-epoch record of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Training loss at the start of each epoch, before its update.
    pub train_loss: Vec<f64>,
    pub validation: Vec<ValidationPoint>,
}

#[derive(Debug, Clone, PartialEq)]
enum Model<T: Scalar> {
    Weighted(LocalSimParams),
    Gabel(Network<T>),
    Chopra(Network<T>),
    T31(Network<T>),
    Esnn { g: Network<T>, c: Network<T> },
}

/// A similarity measure of one of the six kinds, trained or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure<T: Scalar> {
    tag: MeasureTag,
    config: MeasureConfig,
    width: usize,
    classes: usize,
    seed: u64,
    trained: bool,
    model: Model<T>,
}

fn layout(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut l = Vec::with_capacity(hidden.len() + 2);
    l.push(input);
    l.extend_from_slice(hidden);
    l.push(output);
    l
}

fn activations(hidden: usize, inner: Activation, last: Activation) -> Vec<Activation> {
    let mut a = vec![inner; hidden];
    a.push(last);
    a
}

fn cast_matrix<T: Scalar>(m: &Matrix<f64>) -> Matrix<T> {
    Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|&v| T::cast(v)).collect())
        .expect("same shape")
}

fn to_f64<T: Scalar>(m: Matrix<T>) -> Matrix<f64> {
    let (r, c) = (m.rows(), m.cols());
    Matrix::from_vec(r, c, m.into_vec().into_iter().map(|v| v.to_f64_lossless()).collect())
        .expect("same shape")
}

/// One-hot class targets.
pub fn one_hot<T: Scalar>(labels: &[usize], classes: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (i, &l) in labels.iter().enumerate() {
        m.row_mut(i)[l] = T::one();
    }
    m
}

impl<T: Scalar> Measure<T> {
    /// Untrained measure for rows of `width` columns over `classes` classes.
    /// Networks are initialized from seeds derived from `seed`.
    pub fn new(
        tag: MeasureTag,
        config: MeasureConfig,
        attributes: &[Attribute],
        width: usize,
        classes: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if classes < 2 {
            return Err(Error::Config(format!("need at least two classes, got {classes}")));
        }
        let h = config.hidden.len();
        let g_seed = derive_seed(seed, &[1]);
        let (model, trained) = match tag {
            MeasureTag::T11 => (Model::Weighted(LocalSimParams::uniform(attributes, width)?), true),
            MeasureTag::T21 => (Model::Weighted(LocalSimParams::uniform(attributes, width)?), false),
            MeasureTag::Gabel => (
                Model::Gabel(init_network(
                    &layout(2 * width, &config.hidden, 1),
                    &activations(h, config.hidden_activation, Activation::Sigmoid),
                    g_seed,
                )?),
                false,
            ),
            MeasureTag::Chopra => (
                Model::Chopra(init_network(
                    &layout(width, &config.hidden, classes),
                    &activations(h, config.hidden_activation, Activation::Linear),
                    g_seed,
                )?),
                false,
            ),
            MeasureTag::T31 => (
                Model::T31(init_network(
                    &layout(width, &config.hidden, classes),
                    &activations(h, config.hidden_activation, Activation::Softmax),
                    g_seed,
                )?),
                false,
            ),
            MeasureTag::Esnn => (
                Model::Esnn {
                    g: init_network(
                        &layout(width, &config.hidden, classes),
                        &activations(h, config.hidden_activation, Activation::Softmax),
                        g_seed,
                    )?,
                    c: init_network(
                        &layout(classes, &config.combiner_hidden, 1),
                        &activations(
                            config.combiner_hidden.len(),
                            config.combiner_activation,
                            Activation::Sigmoid,
                        ),
                        derive_seed(seed, &[2]),
                    )?,
                },
                false,
            ),
        };
        Ok(Self {
            tag,
            config,
            width,
            classes,
            seed,
            trained,
            model,
        })
    }

    /// Untrained measure shaped for `ds`.
    pub fn for_dataset(tag: MeasureTag, config: MeasureConfig, ds: &Dataset, seed: u64) -> Result<Self> {
        Self::new(tag, config, ds.attributes(), ds.width(), ds.n_classes(), seed)
    }

    pub fn tag(&self) -> MeasureTag {
        self.tag
    }

    pub fn config(&self) -> &MeasureConfig {
        &self.config
    }

    pub fn input_width(&self) -> usize {
        self.width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn local_params(&self) -> Option<&LocalSimParams> {
        match &self.model {
            Model::Weighted(p) => Some(p),
            _ => None,
        }
    }

    /// The embedding network `G`, for measures that have one.
    pub fn embedding_network(&self) -> Option<&Network<T>> {
        match &self.model {
            Model::Chopra(g) | Model::T31(g) | Model::Esnn { g, .. } => Some(g),
            _ => None,
        }
    }

    pub fn combiner_network(&self) -> Option<&Network<T>> {
        match &self.model {
            Model::Esnn { c, .. } => Some(c),
            Model::Gabel(net) => Some(net),
            _ => None,
        }
    }

    /// `G` applied to every row; works before training too.
    pub fn embed(&self, rows: &Matrix<f64>) -> Result<Matrix<f64>> {
        let g = self.embedding_network().ok_or_else(|| {
            Error::Config(format!("measure `{}` has no learned embedding", self.tag))
        })?;
        Ok(to_f64(g.predict_batch(&cast_matrix(rows))?))
    }

    /// Trains on `train` rows of `ds`. Validation loss is recorded every
    /// `validate_every` epochs when `validation` is given.
    pub fn fit(&mut self, ds: &Dataset, train: &[usize], validation: Option<&[usize]>) -> Result<History> {
        if ds.width() != self.width {
            return Err(Error::shape(self.width, ds.width(), "dataset width"));
        }
        if train.is_empty() {
            return Err(Error::Protocol("empty training partition".into()));
        }
        let mut history = History::default();
        if let Model::Weighted(params) = &mut self.model {
            if self.config.epochs > 0 {
                log::warn!("measure `{}` needs no training; ignoring {} epochs", self.tag, self.config.epochs);
            }
            if self.tag == MeasureTag::T21 {
                *params = LocalSimParams::fit(ds.attributes(), ds.features(), train)?;
            }
            self.trained = true;
            return Ok(history);
        }
        let x: Matrix<T> = cast_matrix(&ds.features().select_rows(train));
        let labels: Vec<usize> = train.iter().map(|&r| ds.labels()[r]).collect();
        let targets: Matrix<T> = one_hot(&labels, self.classes);
        let mode = self.config.pair_mode_for(self.tag);
        let fixed_pairs = match mode {
            PairMode::Sampled { .. } => None,
            _ => Some(pairs_over(&labels, &mode)?),
        };
        let pairs_for = |epoch: usize| -> Result<std::borrow::Cow<'_, [PairTriplet]>> {
            match (&fixed_pairs, mode) {
                (Some(p), _) => Ok(std::borrow::Cow::Borrowed(p.as_slice())),
                (None, PairMode::Sampled { count, seed }) => Ok(std::borrow::Cow::Owned(pairs_over(
                    &labels,
                    &PairMode::Sampled {
                        count,
                        seed: derive_seed(seed, &[epoch as u64]),
                    },
                )?)),
                (None, _) => unreachable!("only sampled pairs are drawn per epoch"),
            }
        };
        let cfg = self.config.clone();
        let mut opt_g = None;
        let mut opt_c = None;
        // networks are usable while training so validation can query them
        self.trained = true;
        for epoch in 0..cfg.epochs {
            let loss = match &mut self.model {
                Model::Weighted(_) => unreachable!("handled above"),
                Model::Gabel(net) => {
                    let (loss, grad) = gabel_loss(net, &x, &pairs_for(epoch)?)?;
                    let opt = opt_g.get_or_insert_with(|| cfg.optimizer.build::<T>(net.parameter_count()));
                    opt.step(net.parameters_mut(), &grad.values)?;
                    loss
                }
                Model::Chopra(g) => {
                    let (loss, grad) = contrastive_loss(g, &x, &pairs_for(epoch)?, cfg.contrastive_margin)?;
                    let opt = opt_g.get_or_insert_with(|| cfg.optimizer.build::<T>(g.parameter_count()));
                    opt.step(g.parameters_mut(), &grad.values)?;
                    loss
                }
                Model::T31(g) => {
                    let (loss, grad) = classification_loss(g, &x, &targets)?;
                    let opt = opt_g.get_or_insert_with(|| cfg.optimizer.build::<T>(g.parameter_count()));
                    opt.step(g.parameters_mut(), &grad.values)?;
                    loss
                }
                Model::Esnn { g, c } => {
                    let out = esnn_loss(g, c, cfg.alpha, &x, &targets, &pairs_for(epoch)?)?;
                    let og = opt_g.get_or_insert_with(|| cfg.optimizer.build::<T>(g.parameter_count()));
                    og.step(g.parameters_mut(), &out.g.values)?;
                    let oc = opt_c.get_or_insert_with(|| cfg.optimizer.build::<T>(c.parameter_count()));
                    oc.step(c.parameters_mut(), &out.c.values)?;
                    out.loss
                }
            };
            let loss = loss.to_f64_lossless();
            if !loss.is_finite() {
                self.trained = false;
                return Err(Error::Config(format!(
                    "training loss of `{}` diverged at epoch {epoch}",
                    self.tag
                )));
            }
            history.train_loss.push(loss);
            if let (Some(every), Some(val)) = (cfg.validate_every, validation) {
                if (epoch + 1) % every == 0 {
                    history.validation.push(ValidationPoint {
                        epoch: epoch + 1,
                        loss: crate::eval::retrieval_loss(self, ds, train, val)?,
                    });
                }
            }
        }
        Ok(history)
    }

    fn check_ready(&self, width: usize, context: &'static str) -> Result<()> {
        if !self.trained {
            return Err(Error::NotTrained(self.tag.name().into()));
        }
        if width != self.width {
            return Err(Error::shape(self.width, width, context));
        }
        Ok(())
    }

    /// Raw (unclamped) scores of every row of `left` against every row of
    /// `right`, as a `left.rows() x right.rows()` matrix.
    pub fn score_block(&self, left: &Matrix<f64>, right: &Matrix<f64>) -> Result<Matrix<f64>> {
        self.scores(left, right, false)
    }

    /// A strictly increasing function of [`Measure::score_block`] used for
    /// retrieval. Sigmoid-output measures return the pre-sigmoid logit: the
    /// sigmoid rounds every logit above about 37 to exactly 1.0.
    pub fn rank_block(&self, left: &Matrix<f64>, right: &Matrix<f64>) -> Result<Matrix<f64>> {
        self.scores(left, right, true)
    }

    fn scores(&self, left: &Matrix<f64>, right: &Matrix<f64>, logits: bool) -> Result<Matrix<f64>> {
        self.check_ready(left.cols(), "left input width")?;
        self.check_ready(right.cols(), "right input width")?;
        let (lr, rr) = (left.rows(), right.rows());
        match &self.model {
            Model::Weighted(p) => {
                let mut out = Matrix::zeros(lr, rr);
                for (i, a) in left.iter_rows().enumerate() {
                    for (v, b) in out.row_mut(i).iter_mut().zip(right.iter_rows()) {
                        *v = p.eval(a, b);
                    }
                }
                Ok(out)
            }
            Model::Gabel(net) => Ok(to_f64(gabel::score_block(
                net,
                &cast_matrix(left),
                &cast_matrix(right),
                logits,
            )?)),
            Model::Chopra(g) | Model::T31(g) => {
                let a = g.predict_batch(&cast_matrix(left))?;
                let b = g.predict_batch(&cast_matrix(right))?;
                let mut out = Matrix::zeros(lr, rr);
                let chopra = matches!(self.model, Model::Chopra(_));
                for (i, ea) in a.iter_rows().enumerate() {
                    for (v, eb) in out.row_mut(i).iter_mut().zip(b.iter_rows()) {
                        *v = if chopra {
                            (T::one() / (T::one() + chopra::energy(ea, eb))).to_f64_lossless()
                        } else {
                            classifier::l2_score(ea, eb).to_f64_lossless()
                        };
                    }
                }
                Ok(out)
            }
            Model::Esnn { g, c } => {
                let a = g.predict_batch(&cast_matrix(left))?;
                let b = g.predict_batch(&cast_matrix(right))?;
                Ok(to_f64(esnn::score_embeddings(c, &a, &b, logits)?))
            }
        }
    }

    /// Unclamped score used for ranking.
    pub fn raw_similarity(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_ready(x.len(), "left input width")?;
        self.check_ready(y.len(), "right input width")?;
        let a = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let b = Matrix::from_vec(1, y.len(), y.to_vec())?;
        Ok(self.score_block(&a, &b)?.as_slice()[0])
    }

    /// Score in `[0, 1]`; higher means more similar.
    pub fn similarity(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.raw_similarity(x, y)?.clamp(0.0, 1.0))
    }

    pub fn to_document(&self) -> MeasureDocument {
        let mut networks = BTreeMap::new();
        let local = match &self.model {
            Model::Weighted(p) => Some(p.clone()),
            Model::Gabel(net) => {
                networks.insert("pair".to_string(), net.to_document());
                None
            }
            Model::Chopra(g) | Model::T31(g) => {
                networks.insert("g".to_string(), g.to_document());
                None
            }
            Model::Esnn { g, c } => {
                networks.insert("g".to_string(), g.to_document());
                networks.insert("c".to_string(), c.to_document());
                None
            }
        };
        MeasureDocument {
            format_version: MEASURE_FORMAT_VERSION,
            tag: self.tag,
            config: self.config.clone(),
            input_width: self.width,
            classes: self.classes,
            seed: self.seed,
            trained: self.trained,
            local,
            networks,
        }
    }

    pub fn from_document(doc: &MeasureDocument) -> Result<Self> {
        if doc.format_version != MEASURE_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported measure format version {}",
                doc.format_version
            )));
        }
        let net = |role: &str| -> Result<Network<T>> {
            let d = doc
                .networks
                .get(role)
                .ok_or_else(|| Error::Config(format!("measure document lacks network `{role}`")))?;
            Network::from_document(d)
        };
        let model = match doc.tag {
            MeasureTag::T11 | MeasureTag::T21 => Model::Weighted(
                doc.local
                    .clone()
                    .ok_or_else(|| Error::Config("measure document lacks local parameters".into()))?,
            ),
            MeasureTag::Gabel => Model::Gabel(net("pair")?),
            MeasureTag::Chopra => Model::Chopra(net("g")?),
            MeasureTag::T31 => Model::T31(net("g")?),
            MeasureTag::Esnn => Model::Esnn {
                g: net("g")?,
                c: net("c")?,
            },
        };
        let input = match &model {
            Model::Weighted(p) => p.width,
            Model::Gabel(n) => n.input_width() / 2,
            Model::Chopra(g) | Model::T31(g) | Model::Esnn { g, .. } => g.input_width(),
        };
        if input != doc.input_width {
            return Err(Error::shape(doc.input_width, input, "stored network input width"));
        }
        Ok(Self {
            tag: doc.tag,
            config: doc.config.clone(),
            width: doc.input_width,
            classes: doc.classes,
            seed: doc.seed,
            trained: doc.trained,
            model,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

/// Serialized form of a [`Measure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDocument {
    pub format_version: u32,
    pub tag: MeasureTag,
    pub config: MeasureConfig,
    pub input_width: usize,
    pub classes: usize,
    pub seed: u64,
    pub trained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalSimParams>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub networks: BTreeMap<String, NetworkDocument>,
}

/// Builds a measure for `ds` and trains it on `train`.
pub fn train_measure<T: Scalar>(
    tag: MeasureTag,
    config: &MeasureConfig,
    ds: &Dataset,
    train: &[usize],
    validation: Option<&[usize]>,
    seed: u64,
) -> Result<(Measure<T>, History)> {
    let mut m = Measure::for_dataset(tag, config.clone(), ds, seed)?;
    let history = m.fit(ds, train, validation)?;
    Ok((m, history))
}
