use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{phrase_vector, region_features, VisionBackend, WordVectors};
use crate::corpus::RegionProposal;
use crate::text::NounMention;
use crate::{Error, Result};

/// Width of the joint embedding space.
pub const EMBED_DIM: usize = 1024;

const MAGIC: &[u8; 4] = b"RVVG";
const VERSION: u32 = 1;

/// Two `tanh(W x + b)` projections into a shared embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct VgEncoderParams {
    /// `embed × image_in`
    pub image_weight: Array2<f64>,
    pub image_bias: Array1<f64>,
    /// `embed × text_in`
    pub text_weight: Array2<f64>,
    pub text_bias: Array1<f64>,
}

/// Gradients laid out like [`VgEncoderParams`].
#[derive(Debug, Clone)]
pub struct VgGradients {
    pub image_weight: Array2<f64>,
    pub image_bias: Array1<f64>,
    pub text_weight: Array2<f64>,
    pub text_bias: Array1<f64>,
}

impl VgEncoderParams {
    pub fn zeros(image_in: usize, text_in: usize, embed: usize) -> Self {
        VgEncoderParams {
            image_weight: Array2::zeros((embed, image_in)),
            image_bias: Array1::zeros(embed),
            text_weight: Array2::zeros((embed, text_in)),
            text_bias: Array1::zeros(embed),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization drawn from ChaCha8(`seed`).
    pub fn init(image_in: usize, text_in: usize, embed: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |shape: (usize, usize), fan_in: usize| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            Array2::from_shape_simple_fn(shape, || rng.gen_range(-bound..bound))
        };
        let image_weight = uniform((embed, image_in), image_in);
        let image_bias = uniform((1, embed), image_in).remove_axis(Axis(0));
        let text_weight = uniform((embed, text_in), text_in);
        let text_bias = uniform((1, embed), text_in).remove_axis(Axis(0));
        VgEncoderParams {
            image_weight,
            image_bias,
            text_weight,
            text_bias,
        }
    }

    pub fn image_in(&self) -> usize {
        self.image_weight.ncols()
    }

    pub fn text_in(&self) -> usize {
        self.text_weight.ncols()
    }

    pub fn embed_dim(&self) -> usize {
        self.image_weight.nrows()
    }

    fn check_width(context: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected != found {
            return Err(Error::Dimension {
                context,
                expected,
                found,
            });
        }
        Ok(())
    }

    /// Embeds a batch of region features, one per row.
    pub fn encode_images(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        Self::check_width("image features", self.image_in(), features.ncols())?;
        Ok((features.dot(&self.image_weight.t()) + &self.image_bias).mapv(f64::tanh))
    }

    /// Embeds a batch of averaged word vectors, one per row.
    pub fn encode_texts(&self, vectors: ArrayView2<f64>) -> Result<Array2<f64>> {
        Self::check_width("word vectors", self.text_in(), vectors.ncols())?;
        Ok((vectors.dot(&self.text_weight.t()) + &self.text_bias).mapv(f64::tanh))
    }

    pub fn encode_image(&self, features: &[f64]) -> Result<Vec<f64>> {
        let row = ArrayView2::from_shape((1, features.len()), features).expect("row shape");
        Ok(self.encode_images(row)?.into_raw_vec_and_offset().0)
    }

    pub fn encode_text_vector(&self, vector: &[f64]) -> Result<Vec<f64>> {
        let row = ArrayView2::from_shape((1, vector.len()), vector).expect("row shape");
        Ok(self.encode_texts(row)?.into_raw_vec_and_offset().0)
    }

    /// Symmetric loss of a batch and its gradient with respect to every
    /// parameter.
    pub fn loss_and_gradients(
        &self,
        features: ArrayView2<f64>,
        vectors: ArrayView2<f64>,
    ) -> Result<(f64, VgGradients)> {
        let image = self.encode_images(features)?;
        let text = self.encode_texts(vectors)?;
        let sl = super::symmetric_loss_grad(image.view(), text.view())?;
        // through tanh: d/da tanh(a) = 1 - tanh(a)^2
        let g_image = sl.grad_image * &image.mapv(|e| 1.0 - e * e);
        let g_text = sl.grad_text * &text.mapv(|e| 1.0 - e * e);
        Ok((
            sl.loss,
            VgGradients {
                image_weight: g_image.t().dot(&features),
                image_bias: g_image.sum_axis(Axis(0)),
                text_weight: g_text.t().dot(&vectors),
                text_bias: g_text.sum_axis(Axis(0)),
            },
        ))
    }

    pub fn loss(&self, features: ArrayView2<f64>, vectors: ArrayView2<f64>) -> Result<f64> {
        let image = self.encode_images(features)?;
        let text = self.encode_texts(vectors)?;
        super::symmetric_loss(image.view(), text.view())
    }

    /// Writes `RVVG`, a little-endian `u32` version, the three dimensions
    /// (`image_in`, `text_in`, `embed`) as `u32`, then image weight (row
    /// major), image bias, text weight and text bias as little-endian `f64`.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for d in [self.image_in(), self.text_in(), self.embed_dim()] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let values = self
            .image_weight
            .iter()
            .chain(&self.image_bias)
            .chain(&self.text_weight)
            .chain(&self.text_bias);
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> std::result::Result<Self, String> {
        let mut header = [0u8; 20];
        r.read_exact(&mut header).map_err(|e| format!("header: {e}"))?;
        if &header[..4] != MAGIC {
            return Err("not a grounding encoder archive".into());
        }
        let word = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != VERSION {
            return Err(format!("unsupported version {}", word(0)));
        }
        let (image_in, text_in, embed) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let mut read_vec = |n: usize| -> std::result::Result<Vec<f64>, String> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf).map_err(|e| format!("truncated body: {e}"))?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let shape_err = |e: ndarray::ShapeError| e.to_string();
        let image_weight =
            Array2::from_shape_vec((embed, image_in), read_vec(embed * image_in)?).map_err(shape_err)?;
        let image_bias = Array1::from(read_vec(embed)?);
        let text_weight =
            Array2::from_shape_vec((embed, text_in), read_vec(embed * text_in)?).map_err(shape_err)?;
        let text_bias = Array1::from(read_vec(embed)?);
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| e.to_string())?;
        if !rest.is_empty() {
            return Err(format!("{} trailing bytes", rest.len()));
        }
        Ok(VgEncoderParams {
            image_weight,
            image_bias,
            text_weight,
            text_bias,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|message| Error::Artifact {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// Averages the word vectors of the mention's tokens and projects them.
pub fn encode_text(
    noun: &NounMention,
    words: &dyn WordVectors,
    params: &VgEncoderParams,
) -> Result<Vec<f64>> {
    params.encode_text_vector(&phrase_vector(words, &noun.text)?)
}

/// Projects a region's features; crops go through `vision` first.
pub fn encode_region(
    region: &RegionProposal,
    vision: &dyn VisionBackend,
    params: &VgEncoderParams,
) -> Result<Vec<f64>> {
    params.encode_image(&region_features(region, vision)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{HashedVision, HashedWordVectors};
    use crate::corpus::{BoundingBox, RegionPayload};

    fn region(features: Vec<f64>) -> RegionProposal {
        RegionProposal {
            image_id: "img".into(),
            bbox: BoundingBox {
                x: 0.0,
                y: 0.0,
                width: 1.0,
                height: 1.0,
            },
            confidence: 1.0,
            payload: RegionPayload::Features(features),
        }
    }

    fn mention(text: &str) -> NounMention {
        NounMention {
            text: text.into(),
            token_span: (0, text.split(' ').count()),
            sentence_index: 0,
        }
    }

    #[test]
    fn zero_params_give_zero_embeddings() {
        let p = VgEncoderParams::zeros(3, 4, 5);
        let words = HashedWordVectors::new(4);
        assert_eq!(encode_text(&mention("dog"), &words, &p).unwrap(), vec![0.0; 5]);
        let e = encode_region(&region(vec![0.0; 3]), &HashedVision::new(3), &p).unwrap();
        assert_eq!(e, vec![0.0; 5]);
    }

    #[test]
    fn region_projection_is_tanh_affine() {
        let p = VgEncoderParams::init(3, 2, 4, 9);
        let f = vec![0.5, -1.0, 2.0];
        let e = encode_region(&region(f.clone()), &HashedVision::new(3), &p).unwrap();
        for (k, ek) in e.iter().enumerate() {
            let a: f64 = (0..3).map(|j| p.image_weight[[k, j]] * f[j]).sum::<f64>() + p.image_bias[k];
            assert!((ek - a.tanh()).abs() < 1e-15);
            assert!(*ek > -1.0 && *ek < 1.0);
        }
    }

    #[test]
    fn multi_token_mentions_average() {
        let p = VgEncoderParams::init(3, 4, 6, 1);
        let words = HashedWordVectors::new(4);
        let u = words.vector("red").unwrap();
        let v = words.vector("car").unwrap();
        let mean: Vec<f64> = u.iter().zip(&v).map(|(a, b)| (a + b) / 2.0).collect();
        assert_eq!(
            encode_text(&mention("red car"), &words, &p).unwrap(),
            p.encode_text_vector(&mean).unwrap()
        );
    }

    #[test]
    fn wrong_feature_width() {
        let p = VgEncoderParams::zeros(3, 4, 5);
        let err = encode_region(&region(vec![1.0; 7]), &HashedVision::new(3), &p).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 3, found: 7, .. }));
    }

    #[test]
    fn archive_round_trip() {
        let p = VgEncoderParams::init(3, 2, 4, 5);
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 20 + 8 * (12 + 4 + 8 + 4));
        assert_eq!(&buf[..4], b"RVVG");
        assert_eq!(VgEncoderParams::read_from(&buf[..]).unwrap(), p);
        assert!(VgEncoderParams::read_from(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(VgEncoderParams::read_from(&bad[..]).is_err());
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let p = VgEncoderParams::init(3, 2, 4, 11);
        let feats = Array2::from_shape_fn((3, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let vecs = Array2::from_shape_fn((3, 2), |(i, j)| ((i * 2 + j) as f64 * 0.91).cos());
        let (_, g) = p.loss_and_gradients(feats.view(), vecs.view()).unwrap();
        let h = 1e-6;
        let fd = |mutate: &dyn Fn(&mut VgEncoderParams, f64)| {
            let mut a = p.clone();
            mutate(&mut a, h);
            let mut b = p.clone();
            mutate(&mut b, -h);
            (a.loss(feats.view(), vecs.view()).unwrap() - b.loss(feats.view(), vecs.view()).unwrap())
                / (2.0 * h)
        };
        let d = fd(&|q, e| q.image_weight[[1, 2]] += e);
        assert!((d - g.image_weight[[1, 2]]).abs() < 1e-7);
        let d = fd(&|q, e| q.text_bias[3] += e);
        assert!((d - g.text_bias[3]).abs() < 1e-7);
    }
}
