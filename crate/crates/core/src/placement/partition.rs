use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::greedy::check_stations;
use super::{resolve_pool, solve_step_scoped, PlacementConfig, PlacementError, PlacementTimeline};
use crate::hydraulics::HydraulicProfile;
use crate::network::{NodeId, Topology};
use crate::wq::Scope;

/// Node masks per district name.
pub fn district_masks(
    topology: &Topology,
    partition: &BTreeMap<NodeId, String>,
) -> Result<BTreeMap<String, Vec<bool>>, PlacementError> {
    for node in partition.keys() {
        if topology.node_index(node.as_str()).is_none() {
            return Err(PlacementError::UnknownNode(node.as_str().into()));
        }
    }
    let mut masks: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for (i, node) in topology.nodes().iter().enumerate() {
        let district = partition.get(&node.id).ok_or_else(|| PlacementError::PartitionMissing(node.id.as_str().into()))?;
        masks.entry(district.clone()).or_insert_with(|| vec![false; topology.nodes().len()])[i] = true;
    }
    Ok(masks)
}

/// Solves every district separately. A district models its own nodes and
/// the links with both ends inside; water entering over a boundary link
/// becomes an always-on exogenous input at the receiving node. Candidates
/// are the configured pool restricted to the district.
pub fn partition_solve(
    topology: &Topology,
    profile: &HydraulicProfile,
    partition: &BTreeMap<NodeId, String>,
    config: &PlacementConfig,
) -> Result<BTreeMap<String, PlacementTimeline>, PlacementError> {
    let pool = resolve_pool(topology, config.pool.as_deref())?;
    let mut out = BTreeMap::new();
    for (district, mask) in district_masks(topology, partition)? {
        if !mask.iter().any(|m| *m) {
            return Err(PlacementError::EmptyDistrict(district));
        }
        let local: Vec<usize> = pool.iter().copied().filter(|&n| mask[n]).collect();
        check_stations(config.stations, local.len())?;
        let scope = Scope::district(mask);
        let steps = (0..profile.step_count())
            .map(|k| solve_step_scoped(topology, profile, k, config, &scope, &local))
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(
            district,
            PlacementTimeline {
                scenario: profile.scenario_id().into(),
                metric: config.metric,
                stations: config.stations,
                hydraulic_step: profile.step(),
                steps,
            },
        );
    }
    Ok(out)
}
