from .cbam import (
    ChannelAttentionParams,
    SpatialAttentionParams,
    cbam,
    cbam_node,
    channel_attention,
    channel_attention_map,
    channel_attention_node,
    spatial_attention,
    spatial_attention_map,
    spatial_attention_node,
)

__all__ = [
    "ChannelAttentionParams",
    "SpatialAttentionParams",
    "cbam",
    "cbam_node",
    "channel_attention",
    "channel_attention_map",
    "channel_attention_node",
    "spatial_attention",
    "spatial_attention_map",
    "spatial_attention_node",
]
