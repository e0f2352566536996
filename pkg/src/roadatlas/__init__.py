"""RoadAtlas: road defect and road-marking asset management platform."""

__version__ = "0.1.0"
