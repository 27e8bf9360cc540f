import threading


class ThreadSafeSingletonMeta(type):
    """
    Metaclass singleton guarded by a double-checked lock.

    - One instance per class (subclasses get their own instance).
    - Constructor arguments are only honoured on the first call.
    """

    _instances: dict[type, object] = {}
    _lock = threading.Lock()

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            with cls._lock:
                if cls not in cls._instances:
                    cls._instances[cls] = super().__call__(*args, **kwargs)
        return cls._instances[cls]

    def drop_instance(cls) -> None:
        """Forget the cached instance so the next call rebuilds it"""
        with cls._lock:
            cls._instances.pop(cls, None)
