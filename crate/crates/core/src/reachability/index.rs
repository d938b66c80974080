use crate::axisset::AxisSet;

/// Coordinates of every agent's state and input at every time step inside
/// the stacked vector `z = (x(0), u(0), x(1), u(1), ..., x(H), u(H))`.
/// Agent ids are zero-based; axis indices are one-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisIndex {
    state_dims: Vec<usize>,
    input_dims: Vec<usize>,
    horizon: usize,
    neighbourhoods: Vec<Vec<usize>>,
    n: usize,
    m: usize,
}

impl AxisIndex {
    /// `neighbourhoods[i]` is the communication neighbourhood `M_i`
    /// (ascending, containing `i`).
    pub fn new(state_dims: Vec<usize>, input_dims: Vec<usize>, horizon: usize, neighbourhoods: Vec<Vec<usize>>) -> Self {
        assert_eq!(state_dims.len(), input_dims.len());
        assert_eq!(state_dims.len(), neighbourhoods.len());
        let n = state_dims.iter().sum();
        let m = input_dims.iter().sum();
        AxisIndex {
            state_dims,
            input_dims,
            horizon,
            neighbourhoods,
            n,
            m,
        }
    }

    pub fn agents(&self) -> usize {
        self.state_dims.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn total_states(&self) -> usize {
        self.n
    }

    pub fn total_inputs(&self) -> usize {
        self.m
    }

    pub fn state_dim(&self, i: usize) -> usize {
        self.state_dims[i]
    }

    pub fn input_dim(&self, i: usize) -> usize {
        self.input_dims[i]
    }

    pub fn neighbourhood(&self, i: usize) -> &[usize] {
        &self.neighbourhoods[i]
    }

    /// Coordinates of `x_i(t)`.
    pub fn x_tilde(&self, t: usize, i: usize) -> AxisSet {
        let start = t * (self.n + self.m) + self.state_dims[..i].iter().sum::<usize>() + 1;
        AxisSet::range(start, self.state_dims[i])
    }

    /// Coordinates of `u_i(t)`.
    pub fn u_tilde(&self, t: usize, i: usize) -> AxisSet {
        let start = t * (self.n + self.m) + self.n + self.input_dims[..i].iter().sum::<usize>() + 1;
        AxisSet::range(start, self.input_dims[i])
    }

    pub fn tilde(&self, t: usize, i: usize) -> AxisSet {
        self.x_tilde(t, i).union(&self.u_tilde(t, i))
    }

    pub fn states_of(&self, t: usize, agents: &[usize]) -> AxisSet {
        AxisSet::union_all(agents.iter().map(|&j| self.x_tilde(t, j)).collect::<Vec<_>>().iter())
    }

    pub fn inputs_of(&self, t: usize, agents: &[usize]) -> AxisSet {
        AxisSet::union_all(agents.iter().map(|&j| self.u_tilde(t, j)).collect::<Vec<_>>().iter())
    }

    /// `B_{x,t,i}`: states of `M_i` at time `t`.
    pub fn x_at(&self, t: usize, i: usize) -> AxisSet {
        self.states_of(t, &self.neighbourhoods[i])
    }

    /// `B_{u,t,i}`.
    pub fn u_at(&self, t: usize, i: usize) -> AxisSet {
        self.inputs_of(t, &self.neighbourhoods[i])
    }

    /// `B_{t,i}`.
    pub fn at(&self, t: usize, i: usize) -> AxisSet {
        self.x_at(t, i).union(&self.u_at(t, i))
    }

    fn two_hop(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.neighbourhoods[i]
            .iter()
            .flat_map(|&j| self.neighbourhoods[j].iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `B_{x,t,M_i} = ⋃_{j∈M_i} B_{x,t,j}`.
    pub fn x_at_neighbourhood(&self, t: usize, i: usize) -> AxisSet {
        self.states_of(t, &self.two_hop(i))
    }

    /// `B_{u,t,M_i}`.
    pub fn u_at_neighbourhood(&self, t: usize, i: usize) -> AxisSet {
        self.inputs_of(t, &self.two_hop(i))
    }

    /// `B_{t,M_i}`.
    pub fn at_neighbourhood(&self, t: usize, i: usize) -> AxisSet {
        self.x_at_neighbourhood(t, i).union(&self.u_at_neighbourhood(t, i))
    }

    fn over_horizon(&self, f: impl Fn(usize) -> AxisSet) -> AxisSet {
        let parts: Vec<AxisSet> = (0..=self.horizon).map(f).collect();
        AxisSet::union_all(parts.iter())
    }

    /// `B^H_{x,i}`.
    pub fn horizon_x(&self, i: usize) -> AxisSet {
        self.over_horizon(|t| self.x_at(t, i))
    }

    /// `B^H_{u,i}`.
    pub fn horizon_u(&self, i: usize) -> AxisSet {
        self.over_horizon(|t| self.u_at(t, i))
    }

    /// `B^H_i`: every coordinate of node `i`'s local system.
    pub fn horizon_set(&self, i: usize) -> AxisSet {
        self.over_horizon(|t| self.at(t, i))
    }

    /// `B^H_{u,M_i}`.
    pub fn horizon_u_neighbourhood(&self, i: usize) -> AxisSet {
        self.over_horizon(|t| self.u_at_neighbourhood(t, i))
    }

    /// `B^H_{M_i}`.
    pub fn horizon_neighbourhood(&self, i: usize) -> AxisSet {
        self.over_horizon(|t| self.at_neighbourhood(t, i))
    }

    /// `B̄^H = {1, ..., (H+1)(n+m)}`.
    pub fn global(&self) -> AxisSet {
        AxisSet::range(1, (self.horizon + 1) * (self.n + self.m))
    }

    /// `B̄_{x,t}`: all states at time `t`.
    pub fn global_x(&self, t: usize) -> AxisSet {
        AxisSet::range(t * (self.n + self.m) + 1, self.n)
    }

    /// `B̄^H_u`: all inputs over the horizon.
    pub fn global_u(&self) -> AxisSet {
        self.over_horizon(|t| AxisSet::range(t * (self.n + self.m) + self.n + 1, self.m))
    }

    /// Axes of the admissible control set of node `i`: `B_{x,0,i} ∪ B^H_{u,i}`.
    pub fn control_axes(&self, i: usize) -> AxisSet {
        self.x_at(0, i).union(&self.horizon_u(i))
    }

    /// Axes of the global admissible control set: `B̄_{x,0} ∪ B̄^H_u`.
    pub fn global_control_axes(&self) -> AxisSet {
        self.global_x(0).union(&self.global_u())
    }
}
