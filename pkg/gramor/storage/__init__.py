from gramor.storage.gramian_cache import GramianCache
from gramor.storage.run_manifest import RunManifest
from gramor.storage.system_store import SystemStore, file_hash, system_hash, write_csv
