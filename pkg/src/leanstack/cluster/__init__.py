from .topology import ClusterTopology, load_cluster_config
from .pipeline import PipelineSpec
from .leader import Cluster

__all__ = ["ClusterTopology", "load_cluster_config", "PipelineSpec", "Cluster"]
