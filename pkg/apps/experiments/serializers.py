"""
Serializers for experiment configuration validation.
"""
from django.conf import settings
from rest_framework import serializers


class StrictSerializer(serializers.Serializer):
    """Rejects keys the serializer does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)


class TopologySerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=settings.TOPOLOGY_KINDS)
    n = serializers.IntegerField(min_value=2, required=False, allow_null=True, default=None)
    p = serializers.FloatField(min_value=0.0, max_value=1.0, required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    path = serializers.CharField(required=False, allow_null=True, default=None)
    lazy = serializers.BooleanField(default=True)

    def validate(self, attrs):
        kind = attrs['kind']
        if kind == 'edge_list':
            if not attrs['path']:
                raise serializers.ValidationError({'path': ['An edge_list topology needs a path.']})
            return attrs
        if attrs['n'] is None:
            raise serializers.ValidationError({'n': [f"A {kind} topology needs an agent count."]})
        if kind == 'erdos_renyi':
            if attrs['p'] is None or attrs['p'] <= 0:
                raise serializers.ValidationError({'p': ['An erdos_renyi topology needs 0 < p <= 1.']})
            if attrs['seed'] is None:
                raise serializers.ValidationError({'seed': ['An erdos_renyi topology needs a seed.']})
        if kind == 'ring' and attrs['n'] < 3:
            raise serializers.ValidationError({'n': ['A ring needs at least 3 agents.']})
        return attrs


class DataSerializer(StrictSerializer):
    regime = serializers.ChoiceField(choices=settings.DATA_REGIMES)
    seed = serializers.IntegerField(min_value=0)
    test_frac = serializers.FloatField(default=0.25)
    n_classes = serializers.IntegerField(min_value=2, default=6)
    n_features = serializers.IntegerField(min_value=2, default=20)
    per_class = serializers.IntegerField(min_value=1, default=500)
    separation = serializers.FloatField(default=1.5)
    labels_per_agent = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    writers_per_agent = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    n_writers = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    identity_transforms = serializers.BooleanField(default=False)
    images_path = serializers.CharField(required=False, allow_null=True, default=None)
    labels_path = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_test_frac(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("Test fraction must lie strictly between 0 and 1.")
        return value

    def validate_separation(self, value):
        if value <= 0:
            raise serializers.ValidationError("Separation must be positive.")
        return value

    def validate(self, attrs):
        regime = attrs['regime']
        if regime in ('label_skew', 'idx'):
            if attrs['labels_per_agent'] is None:
                raise serializers.ValidationError({'labels_per_agent': [f"The {regime} regime needs labels_per_agent."]})
            if regime == 'label_skew' and attrs['labels_per_agent'] > attrs['n_classes']:
                raise serializers.ValidationError({'labels_per_agent': ['Cannot exceed n_classes.']})
        if regime == 'feature_skew':
            for key in ('writers_per_agent', 'n_writers'):
                if attrs[key] is None:
                    raise serializers.ValidationError({key: ['The feature_skew regime needs this field.']})
            if attrs['writers_per_agent'] > attrs['n_writers']:
                raise serializers.ValidationError({'writers_per_agent': ['Cannot exceed n_writers.']})
        if regime == 'idx':
            for key in ('images_path', 'labels_path'):
                if not attrs[key]:
                    raise serializers.ValidationError({key: ['The idx regime needs this path.']})
        return attrs


class ModelLayoutSerializer(StrictSerializer):
    hidden = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1, default=lambda: [64])


class AlgorithmSerializer(StrictSerializer):
    name = serializers.ChoiceField(choices=settings.ALGORITHMS, required=False, allow_null=True, default=None)
    eta = serializers.FloatField()
    mu = serializers.FloatField(default=0.9)
    tau_rule = serializers.ChoiceField(choices=settings.TAU_RULES, required=False, allow_null=True, default=None)
    tau_value = serializers.FloatField(required=False, allow_null=True, default=None)
    ft_epochs = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    gt_step_scale = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_eta(self, value):
        if value <= 0:
            raise serializers.ValidationError("Learning rate must be positive.")
        return value

    def validate_mu(self, value):
        if not 0 <= value <= 1:
            raise serializers.ValidationError("Fusion parameter must lie in [0, 1].")
        return value

    def validate_tau_value(self, value):
        if value is not None and value < 0:
            raise serializers.ValidationError("Threshold must be nonnegative.")
        return value

    def validate(self, attrs):
        if attrs['tau_rule'] in ('fixed', 'scaled_deg') and attrs['tau_value'] is None:
            raise serializers.ValidationError({'tau_value': [f"Rule {attrs['tau_rule']} needs tau_value."]})
        return attrs


class RunSerializer(StrictSerializer):
    rounds = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)
    batch_size = serializers.IntegerField(min_value=1, default=settings.SIMULATION['BATCH_SIZE'])
    local_steps = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    trials = serializers.IntegerField(min_value=1, default=1)
    algorithms = serializers.ListField(
        child=serializers.ChoiceField(choices=settings.ALGORITHMS), required=False, default=list
    )
    record_alphas = serializers.BooleanField(default=True)


class TheorySerializer(StrictSerializer):
    estimate = serializers.BooleanField(default=False)
    cadence = serializers.IntegerField(min_value=1, default=10)
    L = serializers.FloatField(default=1.0)
    c = serializers.FloatField(required=False, allow_null=True, default=None)
    F0 = serializers.FloatField(required=False, allow_null=True, default=None)
    F_star = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_L(self, value):
        if value <= 0:
            raise serializers.ValidationError("Smoothness constant must be positive.")
        return value


class ExperimentConfigSerializer(StrictSerializer):
    """
    Full experiment configuration. A single run names its algorithm in
    [algorithm]; a sweep lists several in [run].algorithms.
    """
    topology = TopologySerializer()
    data = DataSerializer()
    model = ModelLayoutSerializer(required=False)
    algorithm = AlgorithmSerializer()
    run = RunSerializer()
    theory = TheorySerializer(required=False)

    def __init__(self, *args, sweep=False, **kwargs):
        self.sweep = sweep
        super().__init__(*args, **kwargs)

    def validate(self, attrs):
        algorithm, run = attrs['algorithm'], attrs['run']
        if self.sweep:
            names = run['algorithms'] or ([algorithm['name']] if algorithm['name'] else [])
            if not names:
                raise serializers.ValidationError({'run': {'algorithms': ['A sweep needs at least one algorithm.']}})
            run['algorithms'] = names
        else:
            if not algorithm['name']:
                raise serializers.ValidationError({'algorithm': {'name': ['This field is required.']}})
            names = [algorithm['name']]

        has_tau = algorithm['tau_rule'] is not None or algorithm['tau_value'] is not None
        if has_tau and 'ce_gatta' not in names:
            raise serializers.ValidationError(
                {'algorithm': {'tau_rule': ['Thresholds belong to ce_gatta only.']}}
            )
        if 'ce_gatta' in names and algorithm['tau_rule'] is None:
            algorithm['tau_rule'] = 'quarter_deg'

        ft_epochs = algorithm['ft_epochs']
        if 'dsgd_ft' in names and ft_epochs is not None and ft_epochs > run['rounds']:
            raise serializers.ValidationError(
                {'algorithm': {'ft_epochs': ['Fine-tuning epochs cannot exceed the round count.']}}
            )
        attrs.setdefault('model', {'hidden': [64]})
        attrs.setdefault('theory', TheorySerializer().to_internal_value({}))
        return attrs
