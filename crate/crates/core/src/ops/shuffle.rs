use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor};

/// Source channel for each output channel of a `groups`-way shuffle.
///
/// Reshape channels to `(groups, c / groups)`, transpose, flatten: output
/// position `j` reads input channel `(j mod g)·(c/g) + ⌊j/g⌋`.
pub fn shuffle_permutation(channels: usize, groups: usize) -> Result<Vec<usize>> {
    if groups == 0 || !channels.is_multiple_of(groups) {
        return Err(Error::Divisibility {
            what: "channel shuffle channels",
            value: channels,
            divisor: groups,
        });
    }
    let per = channels / groups;
    Ok((0..channels).map(|j| (j % groups) * per + j / groups).collect())
}

pub fn channel_shuffle(input: &Tensor, groups: usize) -> Result<Tensor> {
    let s = input.shape();
    let perm = shuffle_permutation(s.c, groups)?;
    let mut data = Vec::with_capacity(s.numel());
    for n in 0..s.n {
        for &src in &perm {
            data.extend_from_slice(input.channel(n, src));
        }
    }
    Tensor::from_vec(Shape4::new(s.n, s.c, s.h, s.w), data)
}
