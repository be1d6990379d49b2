"""Exception and warning types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for all data errors raised by this package."""


# raster
class MalformedTiff(PipelineError):
    pass


class UnsupportedFeature(PipelineError):
    pass


class MissingGeoreference(PipelineError):
    pass


class LossyEncoding(PipelineError):
    pass


class WindowOutOfBounds(PipelineError):
    pass


class InvalidRaster(PipelineError):
    """A decoded grid violates the value range of its declared sensor units."""


# geometry
class MalformedGeoJson(PipelineError):
    pass


class UnsupportedGeometry(PipelineError):
    pass


class MissingIdProperty(PipelineError):
    pass


class AntimeridianCrossing(PipelineError):
    pass


# zonal
class MixedRegion(PipelineError):
    pass


# harmonize
class NoSeasonalData(PipelineError):
    pass


class MissingOverlap(PipelineError):
    def __init__(self, sensor, year):
        super().__init__(f"no {sensor} composite for overlap year {year}")
        self.sensor = sensor
        self.year = year


# dataset
class MalformedCsv(PipelineError):
    pass


class HeaderMismatch(PipelineError):
    pass


class EmptyDataset(PipelineError):
    pass


# regress
class NonFinite(PipelineError):
    pass


class TooFewRows(PipelineError):
    pass


class RankDeficient(PipelineError):
    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__("design matrix is rank deficient; dependent columns: "
                         + ", ".join(self.columns))


class ConstantTarget(PipelineError):
    pass


class DegenerateColumn(UserWarning):
    pass


class PartialSeasonalData(UserWarning):
    pass


class UnclosedRing(UserWarning):
    pass
