//! Binary checkpointing of filter states.
//!
//! Layout (all integers and reals little-endian):
//! magic `BFKS`, format version `u16`, then `u64` state dimension `n_x`,
//! `u64` total weight dimension `n_w`, `u64` output dimension `J`,
//! followed by `f64` payloads in order: state mean (`n_x`), weight mean
//! (`n_w`), `Pˣ` (row-major `n_x²`), `Pˣθ` (row-major `n_x·n_w`), `Pθ`
//! (row-major `n_w²`, densified from tracked storage if needed).

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use super::ekf::AugmentedEkf;
use super::state::{FilterState, WeightCov};
use super::FilterError;

const MAGIC: &[u8; 4] = b"BFKS";
const VERSION: u16 = 1;

impl AugmentedEkf {
    /// Write a state snapshot. Tracked weight covariance is densified.
    pub fn write_snapshot<W: Write>(
        &self,
        state: &FilterState,
        mut w: W,
    ) -> Result<(), FilterError> {
        w.write_all(MAGIC)?;
        w.write_u16::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(state.state_dim() as u64)?;
        w.write_u64::<LittleEndian>(state.weight_dim() as u64)?;
        w.write_u64::<LittleEndian>(self.model().output_dim() as u64)?;
        for v in state.state_mean.iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
        for v in state.weight_mean.iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
        write_row_major(&mut w, &state.cov_state)?;
        write_row_major(&mut w, &state.cov_cross)?;
        write_row_major(&mut w, &state.cov_weight.to_dense())?;
        Ok(())
    }

    /// Read a snapshot written by [`Self::write_snapshot`], validating the
    /// header against this filter's dimensions. The weight covariance
    /// comes back dense.
    pub fn read_snapshot<R: Read>(&self, mut r: R) -> Result<FilterState, FilterError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FilterError::SnapshotFormat("bad magic"));
        }
        if r.read_u16::<LittleEndian>()? != VERSION {
            return Err(FilterError::SnapshotFormat("unsupported version"));
        }
        let n_x = r.read_u64::<LittleEndian>()? as usize;
        let n_w = r.read_u64::<LittleEndian>()? as usize;
        let j_dim = r.read_u64::<LittleEndian>()? as usize;
        if n_x != self.model().state_dim() {
            return Err(FilterError::Dimension {
                what: "snapshot state dimension",
                expected: self.model().state_dim(),
                got: n_x,
            });
        }
        if n_w != self.weight_dim() {
            return Err(FilterError::Dimension {
                what: "snapshot weight dimension",
                expected: self.weight_dim(),
                got: n_w,
            });
        }
        if j_dim != self.model().output_dim() {
            return Err(FilterError::Dimension {
                what: "snapshot output dimension",
                expected: self.model().output_dim(),
                got: j_dim,
            });
        }
        let mut state_mean = DVector::zeros(n_x);
        for v in state_mean.iter_mut() {
            *v = r.read_f64::<LittleEndian>()?;
        }
        let mut weight_mean = DVector::zeros(n_w);
        for v in weight_mean.iter_mut() {
            *v = r.read_f64::<LittleEndian>()?;
        }
        let cov_state = read_row_major(&mut r, n_x, n_x)?;
        let cov_cross = read_row_major(&mut r, n_x, n_w)?;
        let cov_weight = read_row_major(&mut r, n_w, n_w)?;
        Ok(FilterState {
            state_mean,
            weight_mean,
            cov_state,
            cov_cross,
            cov_weight: WeightCov::Dense(cov_weight),
        })
    }
}

fn write_row_major<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<(), FilterError> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_f64::<LittleEndian>(m[(i, j)])?;
        }
    }
    Ok(())
}

fn read_row_major<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<DMatrix<f64>, FilterError> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = r.read_f64::<LittleEndian>()?;
        }
    }
    Ok(m)
}
