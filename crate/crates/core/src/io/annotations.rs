//! Ground-truth CSV: `image_id,xmin,ymin,xmax,ymax,class`, pixels, one box per row.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::boxes::BBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub bbox: BBox,
    /// Foreground class, `>= 1`.
    pub class_id: usize,
}

#[derive(Debug, Deserialize)]
struct Row {
    image_id: String,
    xmin: f32,
    ymin: f32,
    xmax: f32,
    ymax: f32,
    class: usize,
}

pub type GtByImage = BTreeMap<String, Vec<GtBox>>;

pub fn parse_annotations<R: std::io::Read>(reader: R) -> Result<GtByImage> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = GtByImage::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        let bbox = BBox::new(row.xmin, row.ymin, row.xmax, row.ymax).checked()?;
        if row.class == 0 {
            return Err(Error::InvalidArgument(format!(
                "image {}: class 0 is background and cannot be annotated",
                row.image_id
            )));
        }
        out.entry(row.image_id).or_default().push(GtBox {
            bbox,
            class_id: row.class,
        });
    }
    Ok(out)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<GtByImage> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_groups() {
        let text = "image_id,xmin,ymin,xmax,ymax,class\na,0,0,10,10,1\nb, 5, 5, 8, 9, 1\na,20,20,30,25,1\n";
        let gt = parse_annotations(text.as_bytes()).unwrap();
        assert_eq!(gt["a"].len(), 2);
        assert_eq!(gt["b"][0].bbox, BBox::new(5.0, 5.0, 8.0, 9.0));
    }

    #[test]
    fn rejects_bad_rows() {
        let degenerate = "image_id,xmin,ymin,xmax,ymax,class\na,5,0,5,10,1\n";
        assert!(parse_annotations(degenerate.as_bytes()).is_err());
        let background = "image_id,xmin,ymin,xmax,ymax,class\na,0,0,5,10,0\n";
        assert!(parse_annotations(background.as_bytes()).is_err());
        let short = "image_id,xmin,ymin,xmax,ymax,class\na,0,0,5\n";
        assert!(parse_annotations(short.as_bytes()).is_err());
    }
}
