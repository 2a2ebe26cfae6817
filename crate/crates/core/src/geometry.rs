//! Axis-aligned boxes, labeled detections, and intersection-over-union.
//!
//! Boxes are corner pairs `[x1, y1, x2, y2]` in pixel coordinates with
//! `x1 <= x2` and `y1 <= y2`; predictions and ground truth are assumed to
//! share one image frame, so no rescaling happens here. Degenerate boxes
//! (zero width or height) are valid and simply score zero overlap.

use serde::de::{Deserializer, Error as DeError, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::scalar::Scalar;

/// Rejected geometric input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("box coordinate is not finite")]
    NonFiniteCoordinate,
    #[error("box corners are not ordered (x1 <= x2, y1 <= y2)")]
    UnorderedCorners,
    #[error("detection label is empty")]
    EmptyLabel,
}

/// Axis-aligned box `[x1, y1, x2, y2]` with ordered corners.
///
/// Serializes as a bare four-element array. Deserialization accepts corners
/// in any order and normalizes them, matching the tolerance of the answer
/// parser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox<S> {
    x1: S,
    y1: S,
    x2: S,
    y2: S,
}

impl<S: Scalar> BoundingBox<S> {
    /// Build a box from already-ordered corners, rejecting unordered input.
    pub fn new(x1: S, y1: S, x2: S, y2: S) -> Result<Self, GeometryError> {
        if x1 > x2 || y1 > y2 {
            return Err(GeometryError::UnorderedCorners);
        }
        Self::from_corners(x1, y1, x2, y2)
    }

    /// Build a box from two opposite corners, reordering so `x1 <= x2` and
    /// `y1 <= y2`.
    pub fn from_corners(xa: S, ya: S, xb: S, yb: S) -> Result<Self, GeometryError> {
        if !(xa.is_finite() && ya.is_finite() && xb.is_finite() && yb.is_finite()) {
            return Err(GeometryError::NonFiniteCoordinate);
        }
        Ok(Self {
            x1: xa.min(xb),
            y1: ya.min(yb),
            x2: xa.max(xb),
            y2: ya.max(yb),
        })
    }

    pub fn x1(&self) -> S {
        self.x1
    }

    pub fn y1(&self) -> S {
        self.y1
    }

    pub fn x2(&self) -> S {
        self.x2
    }

    pub fn y2(&self) -> S {
        self.y2
    }

    pub fn width(&self) -> S {
        self.x2 - self.x1
    }

    pub fn height(&self) -> S {
        self.y2 - self.y1
    }

    pub fn area(&self) -> S {
        self.width() * self.height()
    }

    /// Corner array `[x1, y1, x2, y2]`.
    pub fn corners(&self) -> [S; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// Intersection area over union area, in `[0, 1]`.
///
/// When the union is empty (two degenerate boxes) the ratio is defined as 0.
pub fn iou<S: Scalar>(a: &BoundingBox<S>, b: &BoundingBox<S>) -> S {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(S::zero());
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(S::zero());
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= S::zero() {
        S::zero()
    } else {
        inter / union
    }
}

impl<S: Scalar + Serialize> Serialize for BoundingBox<S> {
    fn serialize<T: Serializer>(&self, serializer: T) -> Result<T::Ok, T::Error> {
        let mut seq = serializer.serialize_seq(Some(4))?;
        for c in self.corners() {
            seq.serialize_element(&c)?;
        }
        seq.end()
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for BoundingBox<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct BoxVisitor<S>(std::marker::PhantomData<S>);

        impl<'de, S: Scalar + Deserialize<'de>> Visitor<'de> for BoxVisitor<S> {
            type Value = BoundingBox<S>;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("an array of four finite numbers [x1, y1, x2, y2]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut coords = [S::zero(); 4];
                for (i, c) in coords.iter_mut().enumerate() {
                    *c = seq
                        .next_element()?
                        .ok_or_else(|| A::Error::invalid_length(i, &self))?;
                }
                if seq.next_element::<serde::de::IgnoredAny>()?.is_some() {
                    return Err(A::Error::invalid_length(5, &self));
                }
                BoundingBox::from_corners(coords[0], coords[1], coords[2], coords[3])
                    .map_err(A::Error::custom)
            }
        }

        deserializer.deserialize_seq(BoxVisitor(std::marker::PhantomData))
    }
}

/// A box plus its category label.
///
/// Wire form is `{"bbox": [x1, y1, x2, y2], "label": "..."}`. Labels compare
/// equal after trimming and case-folding; no synonym mapping is applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar + Serialize"))]
pub struct Detection<S> {
    pub bbox: BoundingBox<S>,
    pub label: String,
}

impl<S: Scalar> Detection<S> {
    pub fn new(bbox: BoundingBox<S>, label: impl Into<String>) -> Result<Self, GeometryError> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(GeometryError::EmptyLabel);
        }
        Ok(Self { bbox, label })
    }

    /// Trimmed, case-folded label used for equality and category identity.
    pub fn normalized_label(&self) -> String {
        self.label.trim().to_lowercase()
    }

    pub fn labels_match(&self, other: &Self) -> bool {
        self.normalized_label() == other.normalized_label()
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for Detection<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire<S: Scalar> {
            #[serde(bound(deserialize = "S: Scalar + Deserialize<'de>"))]
            bbox: BoundingBox<S>,
            label: String,
        }
        let wire = Wire::deserialize(deserializer)?;
        Detection::new(wire.bbox, wire.label).map_err(D::Error::custom)
    }
}
