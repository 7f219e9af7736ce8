use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Block-wise map laid over an image: `rows = ceil(height / b)`,
/// `cols = ceil(width / b)`; edge blocks may be partial.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid<T> {
    rows: usize,
    cols: usize,
    block: usize,
    values: Vec<T>,
}

impl<T: Clone> BlockGrid<T> {
    pub fn filled(rows: usize, cols: usize, block: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            block,
            values: vec![value; rows * cols],
        }
    }

    /// Grid covering a `width × height` image with blocks of size `block`.
    pub fn for_image(width: usize, height: usize, block: usize, value: T) -> Self {
        Self::filled(height.div_ceil(block), width.div_ceil(block), block, value)
    }
}

impl<T> BlockGrid<T> {
    pub fn from_vec(rows: usize, cols: usize, block: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), rows * cols, "grid value count mismatch");
        Self {
            rows,
            cols,
            block,
            values,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, block: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            block,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.values[row * self.cols + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.values[row * self.cols + col] = value;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn same_shape<U>(&self, other: &BlockGrid<U>) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.block == other.block
    }

    /// Block containing pixel `(x, y)`, if inside the grid.
    pub fn block_of(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let (r, c) = (y / self.block, x / self.block);
        (r < self.rows && c < self.cols).then_some((r, c))
    }

    /// Value of the block containing pixel `(x, y)`.
    pub fn at_pixel(&self, x: usize, y: usize) -> &T {
        self.get(y / self.block, x / self.block)
    }

    /// Up to four edge-adjacent block coordinates.
    pub fn neighbors4(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(dr, dc)| {
                let (r, c) = (row as isize + dr, col as isize + dc);
                (r >= 0 && c >= 0 && r < rows && c < cols).then_some((r as usize, c as usize))
            })
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> BlockGrid<U> {
        BlockGrid {
            rows: self.rows,
            cols: self.cols,
            block: self.block,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &T)> {
        let cols = self.cols;
        self.values.iter().enumerate().map(move |(i, v)| ((i / cols, i % cols), v))
    }
}

impl<T: Display> BlockGrid<T> {
    /// Text dump: a `#` header with the block size and grid dims, then one
    /// row of space-separated values per block row.
    pub fn write_text(&self, path: &Path, label: &str, extra_header: Option<&str>) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!(
            "# {label} b={} rows={} cols={}\n",
            self.block, self.rows, self.cols
        ));
        if let Some(extra) = extra_header {
            out.push_str(&format!("# {extra}\n"));
        }
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
