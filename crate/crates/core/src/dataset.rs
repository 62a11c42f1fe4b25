//! Labelled image collections.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub id: String,
    /// `[C, H, W]`
    pub image: Tensor<f32>,
    pub class_label: i32,
}

/// Items sharing one image shape, with a per-class index.
///
/// Ids are unique; every item sits in exactly one class bucket.
#[derive(Clone, Debug)]
pub struct Dataset {
    items: Vec<Item>,
    shape: [usize; 3],
    by_id: HashMap<String, usize>,
    classes: BTreeMap<i32, Vec<usize>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.items == other.items
    }
}

impl Dataset {
    pub fn new(items: Vec<Item>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Data("dataset has no items".into()))?;
        let shape: [usize; 3] = first
            .image
            .shape()
            .try_into()
            .map_err(|_| Error::Dimension(format!("images must be [C, H, W], got {:?}", first.image.shape())))?;
        let mut by_id = HashMap::with_capacity(items.len());
        let mut classes: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, item) in items.iter().enumerate() {
            if item.image.shape() != shape {
                return Err(Error::Dimension(format!(
                    "item `{}` has shape {:?}, dataset shape is {shape:?}",
                    item.id,
                    item.image.shape()
                )));
            }
            if by_id.insert(item.id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate item id `{}`", item.id)));
            }
            classes.entry(item.class_label).or_default().push(i);
        }
        Ok(Self {
            items,
            shape,
            by_id,
            classes,
        })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `(C, H, W)`
    pub fn image_shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn item(&self, index: usize) -> &Item {
        &self.items[index]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.by_id.get(id).copied().ok_or_else(|| Error::Lookup(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<&Item> {
        Ok(&self.items[self.index_of(id)?])
    }

    /// Class label → item indices, in dataset order.
    pub fn class_index(&self) -> &BTreeMap<i32, Vec<usize>> {
        &self.classes
    }

    pub fn class_members(&self, label: i32) -> &[usize] {
        self.classes.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Images at `indices` stacked into `[N, C, H, W]`.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let imgs: Vec<&Tensor<f32>> = indices.iter().map(|&i| &self.items[i].image).collect();
        Tensor::stack(&imgs)
    }

    /// A new dataset holding the items at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.items[i].clone()).collect())
    }

    /// Stratified `k`-fold split: fold `f` gets every `k`-th member of each class.
    pub fn fold(&self, k: usize, f: usize) -> Result<(Self, Self)> {
        if k < 2 || f >= k {
            return Err(Error::Config(format!("fold {f} of {k} is invalid")));
        }
        let mut train = Vec::new();
        let mut held = Vec::new();
        for members in self.classes.values() {
            for (j, &i) in members.iter().enumerate() {
                if j % k == f {
                    held.push(i);
                } else {
                    train.push(i);
                }
            }
        }
        train.sort_unstable();
        held.sort_unstable();
        Ok((self.subset(&train)?, self.subset(&held)?))
    }
}
