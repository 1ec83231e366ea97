# minimal stubs for statsd_client (imports as "statsd")

class StatsdClient:
    def __init__(
        self, host: str = ..., port: int | None = ..., prefix: str | None = ...
    ) -> None: ...
    def incr(self, name: str, count: int = ..., rate: float = ...) -> None: ...
    def gauge(self, name: str, value: float, rate: float = ...) -> None: ...
    def timing(self, name: str, elapsed: float, rate: float = ...) -> None: ...
