//! Versioned binary container for learner snapshots. Round-trips are
//! bit-faithful: floats travel as raw IEEE-754 bits.

use std::io::{Cursor, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::learners::svm::{SupportVector, SvmConfig};
use crate::learners::{FiniteClass, KernelSvm, LearnerState, NeuralNet};

const MAGIC: &[u8; 4] = b"PALM";
const VERSION: u16 = 1;

const TAG_SVM: u8 = 1;
const TAG_NN: u8 = 2;
const TAG_FINITE: u8 = 3;

fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_u64::<LittleEndian>(v.to_bits())?;
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(r.read_u64::<LittleEndian>()?))
}

fn write_f64_slice(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    w.write_u64::<LittleEndian>(vs.len() as u64)?;
    for &v in vs {
        write_f64(w, v)?;
    }
    Ok(())
}

fn read_f64_vec(r: &mut impl Read) -> Result<Vec<f64>> {
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(read_f64(r)?);
    }
    Ok(out)
}

pub fn serialize(state: &LearnerState) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.write_all(MAGIC)?;
    out.write_u16::<LittleEndian>(VERSION)?;
    match state {
        LearnerState::Svm(svm) => {
            out.write_u8(TAG_SVM)?;
            let cfg = svm.config();
            write_f64(&mut out, cfg.c)?;
            write_f64(&mut out, cfg.gamma)?;
            write_f64(&mut out, cfg.kkt_tol)?;
            out.write_u64::<LittleEndian>(cfg.cache_rows as u64)?;
            write_f64(&mut out, svm.bias())?;
            out.write_u64::<LittleEndian>(svm.support_count() as u64)?;
            for sv in svm.support_vectors() {
                out.write_u64::<LittleEndian>(sv.index as u64)?;
                write_f64(&mut out, sv.y)?;
                write_f64(&mut out, sv.p)?;
                write_f64(&mut out, sv.beta)?;
                write_f64(&mut out, sv.g)?;
                write_f64_slice(&mut out, &sv.x)?;
            }
        }
        LearnerState::Nn(nn) => {
            out.write_u8(TAG_NN)?;
            out.write_u64::<LittleEndian>(nn.dim as u64)?;
            out.write_u64::<LittleEndian>(nn.hidden as u64)?;
            write_f64(&mut out, nn.step)?;
            write_f64_slice(&mut out, &nn.params)?;
            write_f64_slice(&mut out, &nn.accumulators)?;
        }
        LearnerState::Finite(f) => {
            out.write_u8(TAG_FINITE)?;
            write_f64_slice(&mut out, f.thresholds())?;
            write_f64_slice(&mut out, f.mistake_sums())?;
            out.write_u64::<LittleEndian>(f.consumed())?;
            out.write_u64::<LittleEndian>(f.log().len() as u64)?;
            for e in f.log() {
                write_f64(&mut out, e.x)?;
                write_f64(&mut out, e.y)?;
                write_f64(&mut out, e.p)?;
                out.write_u8(e.queried as u8)?;
            }
        }
    }
    Ok(out)
}

pub fn deserialize(bytes: &[u8]) -> Result<LearnerState> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format("bad snapshot magic"));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported snapshot version {version}")));
    }
    match r.read_u8()? {
        TAG_SVM => {
            let c = read_f64(&mut r)?;
            let gamma = read_f64(&mut r)?;
            let kkt_tol = read_f64(&mut r)?;
            let cache_rows = r.read_u64::<LittleEndian>()? as usize;
            let bias = read_f64(&mut r)?;
            let n = r.read_u64::<LittleEndian>()? as usize;
            let mut svs = Vec::with_capacity(n);
            for _ in 0..n {
                let index = r.read_u64::<LittleEndian>()? as usize;
                let y = read_f64(&mut r)?;
                let p = read_f64(&mut r)?;
                let beta = read_f64(&mut r)?;
                let g = read_f64(&mut r)?;
                let x = read_f64_vec(&mut r)?;
                svs.push(SupportVector {
                    index,
                    x,
                    y,
                    p,
                    beta,
                    g,
                });
            }
            let cfg = SvmConfig {
                c,
                gamma,
                kkt_tol,
                cache_rows,
            };
            Ok(LearnerState::Svm(KernelSvm::restore(cfg, svs, bias)))
        }
        TAG_NN => {
            let dim = r.read_u64::<LittleEndian>()? as usize;
            let hidden = r.read_u64::<LittleEndian>()? as usize;
            let step = read_f64(&mut r)?;
            let params = read_f64_vec(&mut r)?;
            let accumulators = read_f64_vec(&mut r)?;
            if params.len() != hidden * dim + 2 * hidden + 1 || accumulators.len() != params.len() {
                return Err(Error::format("snapshot parameter count mismatch"));
            }
            Ok(LearnerState::Nn(NeuralNet {
                dim,
                hidden,
                step,
                params,
                accumulators,
            }))
        }
        TAG_FINITE => {
            let thresholds = read_f64_vec(&mut r)?;
            let sums = read_f64_vec(&mut r)?;
            let m = r.read_u64::<LittleEndian>()?;
            let log_len = r.read_u64::<LittleEndian>()? as usize;
            let mut f = FiniteClass::new(thresholds);
            for _ in 0..log_len {
                let x = read_f64(&mut r)?;
                let y = read_f64(&mut r)?;
                let p = read_f64(&mut r)?;
                let queried = r.read_u8()? != 0;
                f.consume(x, y, p, queried);
            }
            if f.consumed() != m || f.mistake_sums() != sums.as_slice() {
                return Err(Error::Integrity(
                    "snapshot log does not reproduce the stored mistake sums".to_string(),
                ));
            }
            Ok(LearnerState::Finite(f))
        }
        tag => Err(Error::format(format!("unknown learner tag {tag}"))),
    }
}
